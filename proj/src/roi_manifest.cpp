#include <json.hpp>

#include "fbtex/error.hpp"
#include "fbtex/imaging.hpp"

namespace fbtex {

using nlohmann::json;

namespace {

int require_int(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_number_integer())
    throw ManifestError(where + ": field '" + key + "' must be an integer");
  return it->get<int>();
}

}  // namespace

std::vector<std::pair<std::string, RoiEntry>> parse_roi_manifest(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ManifestError(std::string("roi manifest is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ManifestError("roi manifest must be a JSON object");

  std::vector<std::pair<std::string, RoiEntry>> out;
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    const std::string& path = it.key();
    RoiEntry entry;
    if (it->is_object()) {
      auto pc = it->find("precropped");
      if (pc == it->end() || !pc->is_boolean() || !pc->get<bool>() || it->size() != 1)
        throw ManifestError(path + ": object entries must be exactly {\"precropped\": true}");
      entry.precropped = true;
    } else if (it->is_array()) {
      if (it->size() != 4) throw ManifestError(path + ": expected four rois (F, N, R, L)");
      bool seen[4] = {false, false, false, false};
      for (const json& r : *it) {
        if (!r.is_object()) throw ManifestError(path + ": roi must be an object");
        for (auto f = r.begin(); f != r.end(); ++f) {
          const std::string& k = f.key();
          if (k != "block" && k != "x" && k != "y" && k != "w" && k != "h")
            throw ManifestError(path + ": unknown roi field '" + k + "'");
        }
        auto b = r.find("block");
        if (b == r.end() || !b->is_string()) throw ManifestError(path + ": roi needs a block id");
        RoiRect rect;
        rect.block = parse_block_id(b->get<std::string>());
        if (seen[static_cast<int>(rect.block)])
          throw ManifestError(path + ": duplicate block " + b->get<std::string>());
        seen[static_cast<int>(rect.block)] = true;
        rect.x = require_int(r, "x", path);
        rect.y = require_int(r, "y", path);
        rect.w = require_int(r, "w", path);
        rect.h = require_int(r, "h", path);
        entry.rois.push_back(rect);
      }
    } else {
      throw ManifestError(path + ": entry must be an array of rois or {\"precropped\": true}");
    }
    out.emplace_back(path, std::move(entry));
  }
  return out;
}

FacialBlocks load_facial_blocks(const std::filesystem::path& image_path, const RoiEntry& entry,
                                CheekMode cheek) {
  if (!entry.precropped) {
    GrayImage gray = to_grayscale(read_image(image_path));
    return extract_blocks(gray, entry.rois, cheek);
  }
  auto part = [&](char letter) {
    auto p = image_path.parent_path() /
             (image_path.stem().string() + "_" + std::string(1, letter) + ".png");
    return to_grayscale(read_image(p));
  };
  return blocks_from_crops(part('F'), part('N'), part('R'), part('L'), cheek);
}

}  // namespace fbtex
