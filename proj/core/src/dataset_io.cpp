#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "epo/common.hpp"
#include "epo/world.hpp"

namespace epo::world {

namespace {

using nlohmann::json;

json polyline_to_json(const geom::Polyline& line) {
  json arr = json::array();
  for (const auto& p : line.points()) arr.push_back({p.x, p.y});
  return arr;
}

geom::Polyline polyline_from_json(const json& arr) {
  std::vector<geom::Vec2> pts;
  for (const auto& p : arr) pts.push_back({p.at(0), p.at(1)});
  return geom::Polyline(std::move(pts));
}

json ring_to_json(const geom::Polygon& poly) {
  json arr = json::array();
  for (const auto& p : poly.ring()) arr.push_back({p.x, p.y});
  return arr;
}

geom::Polygon ring_from_json(const json& arr) {
  std::vector<geom::Vec2> pts;
  for (const auto& p : arr) pts.push_back({p.at(0), p.at(1)});
  return geom::Polygon(std::move(pts));
}

json clip_to_json(const ScenarioClip& clip) {
  json j;
  j["schema_version"] = 1;
  j["id"] = clip.id;
  j["family"] = family_name(clip.family);
  j["rng_seed"] = clip.rng_seed;

  json map;
  map["route"] = polyline_to_json(clip.map.route);
  map["drivable"] = ring_to_json(clip.map.drivable);
  map["lanes"] = json::array();
  for (const auto& lane : clip.map.lanes) {
    map["lanes"].push_back(
        {{"width", lane.width}, {"centerline", polyline_to_json(lane.centerline)}});
  }
  map["stop_lines"] = json::array();
  for (const auto& line : clip.map.stop_lines) {
    json red = json::array();
    for (const auto& iv : line.red_intervals) red.push_back({iv.begin, iv.end});
    map["stop_lines"].push_back({{"s", line.route_s}, {"red", red}});
  }
  j["map"] = std::move(map);

  j["agents"] = json::array();
  for (const auto& agent : clip.agents) {
    json states = json::array();
    for (const auto& st : agent.states) {
      states.push_back({st.pose.x, st.pose.y, st.pose.heading, st.speed});
    }
    j["agents"].push_back({{"half_length", agent.half_length},
                           {"half_width", agent.half_width},
                           {"states", std::move(states)}});
  }

  j["frames"] = json::array();
  for (const auto& f : clip.frames) {
    j["frames"].push_back({{"t", f.timestamp},
                           {"tick", f.tick},
                           {"ego", {f.ego_pose.x, f.ego_pose.y, f.ego_pose.heading,
                                    f.ego_speed, f.ego_accel}}});
  }
  return j;
}

ScenarioClip clip_from_json(const json& j) {
  if (j.at("schema_version").get<int>() != 1) {
    throw FormatError("unsupported dataset schema_version");
  }
  ScenarioClip clip;
  clip.id = j.at("id").get<std::string>();
  const auto family = family_from_name(j.at("family").get<std::string>());
  if (!family) throw FormatError("unknown scenario family in dataset");
  clip.family = *family;
  clip.rng_seed = j.at("rng_seed").get<std::uint64_t>();

  const json& map = j.at("map");
  clip.map.route = polyline_from_json(map.at("route"));
  clip.map.drivable = ring_from_json(map.at("drivable"));
  for (const auto& lane : map.at("lanes")) {
    clip.map.lanes.push_back({polyline_from_json(lane.at("centerline")),
                              lane.at("width").get<double>()});
  }
  for (const auto& line : map.at("stop_lines")) {
    StopLine sl;
    sl.route_s = line.at("s").get<double>();
    for (const auto& iv : line.at("red")) {
      sl.red_intervals.push_back({iv.at(0).get<double>(), iv.at(1).get<double>()});
    }
    clip.map.stop_lines.push_back(std::move(sl));
  }

  for (const auto& agent : j.at("agents")) {
    AgentTrack track;
    track.half_length = agent.at("half_length").get<double>();
    track.half_width = agent.at("half_width").get<double>();
    for (const auto& st : agent.at("states")) {
      track.states.push_back(
          {geom::Pose2(st.at(0), st.at(1), st.at(2)), st.at(3).get<double>()});
    }
    clip.agents.push_back(std::move(track));
  }

  for (const auto& f : j.at("frames")) {
    Frame frame;
    frame.timestamp = f.at("t").get<double>();
    frame.tick = f.at("tick").get<int>();
    const auto& ego = f.at("ego");
    frame.ego_pose = geom::Pose2(ego.at(0), ego.at(1), ego.at(2));
    frame.ego_speed = ego.at(3).get<double>();
    frame.ego_accel = ego.at(4).get<double>();
    clip.frames.push_back(frame);
  }
  return clip;
}

}  // namespace

std::string serialize_dataset(const Dataset& dataset) {
  std::ostringstream out;
  for (const auto& clip : dataset.clips) {
    out << clip_to_json(clip).dump() << "\n";
  }
  return out.str();
}

void save_dataset(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open dataset file for writing: " + path);
  out << serialize_dataset(dataset);
  if (!out) throw FormatError("dataset write failed: " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open dataset file: " + path);
  Dataset dataset;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      dataset.clips.push_back(clip_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      std::ostringstream os;
      os << path << ":" << line_no << ": " << e.what();
      throw FormatError(os.str());
    }
  }
  return dataset;
}

namespace {

json family_to_json(const FamilyConfig& fam) {
  return {{"count", fam.count}, {"speed", {fam.speed_min, fam.speed_max}}};
}

void family_from_json(const json& j, FamilyConfig& fam) {
  fam.count = j.value("count", fam.count);
  if (j.contains("speed")) {
    fam.speed_min = j.at("speed").at(0).get<double>();
    fam.speed_max = j.at("speed").at(1).get<double>();
  }
}

}  // namespace

void save_generator_config(const GeneratorConfig& config,
                           const std::string& path) {
  json j;
  j["frames_per_clip"] = config.frames_per_clip;
  j["lane_width"] = {config.lane_width_min, config.lane_width_max};
  j["route_length"] = {config.route_length_min, config.route_length_max};
  j["curve_radius"] = {config.curve_radius_min, config.curve_radius_max};
  j["lead_gap"] = {config.lead_gap_min, config.lead_gap_max};
  j["track_seconds"] = config.track_seconds;
  j["ego"] = {{"half_length", config.ego.half_length},
              {"half_width", config.ego.half_width},
              {"wheelbase", config.ego.wheelbase},
              {"max_steer", config.ego.max_steer},
              {"max_accel", config.ego.max_accel},
              {"max_brake", config.ego.max_brake},
              {"max_speed", config.ego.max_speed}};
  json families;
  for (Family f : {Family::kStraight, Family::kCurve, Family::kIntersectionLight,
                   Family::kLeadBrake, Family::kOncomingOvertake,
                   Family::kParkedObstruction}) {
    families[family_name(f)] = family_to_json(config.family(f));
  }
  j["families"] = std::move(families);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open config file for writing: " + path);
  out << j.dump(2) << "\n";
}

GeneratorConfig load_generator_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError(std::string("config parse error: ") + e.what());
  }
  GeneratorConfig config;
  config.frames_per_clip = j.value("frames_per_clip", config.frames_per_clip);
  auto range = [&](const char* key, double& lo, double& hi) {
    if (j.contains(key)) {
      lo = j.at(key).at(0).get<double>();
      hi = j.at(key).at(1).get<double>();
    }
  };
  range("lane_width", config.lane_width_min, config.lane_width_max);
  range("route_length", config.route_length_min, config.route_length_max);
  range("curve_radius", config.curve_radius_min, config.curve_radius_max);
  range("lead_gap", config.lead_gap_min, config.lead_gap_max);
  config.track_seconds = j.value("track_seconds", config.track_seconds);
  if (j.contains("ego")) {
    const json& e = j.at("ego");
    config.ego.half_length = e.value("half_length", config.ego.half_length);
    config.ego.half_width = e.value("half_width", config.ego.half_width);
    config.ego.wheelbase = e.value("wheelbase", config.ego.wheelbase);
    config.ego.max_steer = e.value("max_steer", config.ego.max_steer);
    config.ego.max_accel = e.value("max_accel", config.ego.max_accel);
    config.ego.max_brake = e.value("max_brake", config.ego.max_brake);
    config.ego.max_speed = e.value("max_speed", config.ego.max_speed);
  }
  if (j.contains("families")) {
    for (Family f :
         {Family::kStraight, Family::kCurve, Family::kIntersectionLight,
          Family::kLeadBrake, Family::kOncomingOvertake,
          Family::kParkedObstruction}) {
      if (j.at("families").contains(family_name(f))) {
        family_from_json(j.at("families").at(family_name(f)), config.family(f));
      }
    }
  }
  return config;
}

}  // namespace epo::world
