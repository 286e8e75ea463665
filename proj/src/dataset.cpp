#include "fbtex/dataset.hpp"

#include "fbtex/error.hpp"

namespace fbtex {

Camera parse_camera(std::string_view s) {
  if (s == "12mp") return Camera::Mp12;
  if (s == "7mp") return Camera::Mp7;
  if (s == "720p") return Camera::P720;
  throw DatasetError("unknown camera '" + std::string(s) + "' (expected 12mp|7mp|720p)");
}

std::string_view to_string(Camera c) {
  switch (c) {
    case Camera::Mp12: return "12mp";
    case Camera::Mp7: return "7mp";
    case Camera::P720: return "720p";
  }
  return "12mp";
}

}  // namespace fbtex
