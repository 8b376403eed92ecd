#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"

#include "pushgrasp/scene.hpp"

namespace pushgrasp {

inline constexpr int kSceneFormatVersion = 1;

nlohmann::json scene_to_json(const Scene& scene);
// Throws std::runtime_error on a version mismatch or malformed document.
Scene scene_from_json(const nlohmann::json& doc);

void save_scene(const Scene& scene, const std::filesystem::path& path);
Scene load_scene(const std::filesystem::path& path);

}  // namespace pushgrasp
