#include "pushgrasp/scene_io.hpp"

#include <fstream>
#include <stdexcept>

namespace pushgrasp {

nlohmann::json scene_to_json(const Scene& scene) {
  nlohmann::json objects = nlohmann::json::array();
  for (const auto& o : scene.objects) {
    objects.push_back({
        {"id", o.id},
        {"shape", to_string(o.shape)},
        {"half_extents", {o.half_extents.x(), o.half_extents.y()}},
        {"height", o.height},
        {"pose", {o.pose.x, o.pose.y, o.pose.theta}},
        {"color_id", o.color_id},
        {"is_goal", o.is_goal},
    });
  }
  return {
      {"version", kSceneFormatVersion},
      {"seed", scene.rng_seed},
      {"scenario", to_string(scene.scenario)},
      {"ungraspable_certificate", scene.ungraspable_certificate},
      {"workspace",
       {scene.workspace.lo.x(), scene.workspace.lo.y(), scene.workspace.hi.x(),
        scene.workspace.hi.y()}},
      {"objects", objects},
  };
}

Scene scene_from_json(const nlohmann::json& doc) {
  const int version = doc.at("version").get<int>();
  if (version != kSceneFormatVersion) {
    throw std::runtime_error("scene format version " + std::to_string(version) +
                             " is not supported (expected " +
                             std::to_string(kSceneFormatVersion) + ")");
  }
  Scene scene;
  scene.rng_seed = doc.at("seed").get<std::uint64_t>();
  scene.scenario = scenario_from_string(doc.value("scenario", std::string("custom")));
  scene.ungraspable_certificate = doc.value("ungraspable_certificate", false);
  const auto& ws = doc.at("workspace");
  scene.workspace = {Vec2(ws.at(0).get<double>(), ws.at(1).get<double>()),
                     Vec2(ws.at(2).get<double>(), ws.at(3).get<double>())};
  for (const auto& jo : doc.at("objects")) {
    ObjectBody o;
    o.id = jo.at("id").get<int>();
    o.shape = shape_from_string(jo.at("shape").get<std::string>());
    o.half_extents = Vec2(jo.at("half_extents").at(0).get<double>(),
                          jo.at("half_extents").at(1).get<double>());
    o.height = jo.at("height").get<double>();
    o.pose = {jo.at("pose").at(0).get<double>(), jo.at("pose").at(1).get<double>(),
              jo.at("pose").at(2).get<double>()};
    o.color_id = jo.at("color_id").get<int>();
    o.is_goal = jo.at("is_goal").get<bool>();
    if (o.half_extents.minCoeff() <= 0.0 || o.height <= 0.0) {
      throw std::runtime_error("object " + std::to_string(o.id) +
                               " has non-positive dimensions");
    }
    if (o.color_id < 0 || o.color_id >= kPaletteSize) {
      throw std::runtime_error("object " + std::to_string(o.id) + " has color outside palette");
    }
    scene.objects.push_back(o);
  }
  for (std::size_t i = 1; i < scene.objects.size(); ++i) {
    if (scene.objects[i].id <= scene.objects[i - 1].id) {
      throw std::runtime_error("object ids must be unique and ascending");
    }
  }
  return scene;
}

void save_scene(const Scene& scene, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << scene_to_json(scene).dump(2) << '\n';
}

Scene load_scene(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return scene_from_json(nlohmann::json::parse(in));
}

}  // namespace pushgrasp
