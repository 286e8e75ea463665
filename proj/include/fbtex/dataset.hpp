#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "fbtex/classify.hpp"
#include "fbtex/imaging.hpp"

namespace fbtex {

enum class Camera { Mp12, Mp7, P720 };

inline constexpr std::array<Camera, 3> kAllCameras = {Camera::Mp12, Camera::Mp7, Camera::P720};

Camera parse_camera(std::string_view s);
std::string_view to_string(Camera c);

/// One photographed subject on one camera, reduced to its three blocks.
struct Sample {
  std::string subject_id;
  Camera camera = Camera::Mp12;
  Label label = Label::DM;
  FacialBlocks blocks;
};

using Dataset = std::vector<Sample>;

}  // namespace fbtex
