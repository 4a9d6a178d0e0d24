#include "epo/reward.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "epo/common.hpp"

namespace epo::reward {

namespace {
constexpr double kDt = traj::kTickSeconds;
constexpr int kN = traj::kWaypointCount;
constexpr int kTtcProbeTicks = 10;  // 1.0 s lookahead in 0.1 s steps
constexpr double kStationarySpeed = 0.1;
constexpr double kMinFeasibleProgress = 5.0;
constexpr double kLaneKeepLimit = 0.5;
constexpr double kDirectionSpeedGate = 0.5;
}  // namespace

MetricWeights MetricWeights::checked(double ttc, double ep, double lk,
                                     double hc, double ec) {
  if (ttc < 0 || ep < 0 || lk < 0 || hc < 0 || ec < 0) {
    throw ConfigError("metric weights must be non-negative");
  }
  MetricWeights w{ttc, ep, lk, hc, ec};
  if (w.sum() <= 0.0) throw ConfigError("metric weights must not all be zero");
  return w;
}

double aggregate_epdms(const MetricVector& mv, const MetricWeights& w) {
  const double penalty = mv.nc * mv.dac * mv.ddc * mv.tlc;
  const double weighted = (w.w_ttc * mv.ttc + w.w_ep * mv.ep + w.w_lk * mv.lk +
                           w.w_hc * mv.hc + w.w_ec * mv.ec) /
                          w.sum();
  return penalty * weighted;
}

int extended_comfort_pair(const traj::KinematicProfile& prev,
                          const traj::KinematicProfile& cur, int shift_ticks,
                          const EcThresholds& th) {
  // Compare the aligned windows where both sides carry genuine backward
  // differences: the previous plan's final entry repeats its neighbour and
  // the current plan's leading entries are boundary-seeded, so those ticks
  // are skipped per quantity.
  const int last = kN - 2 - shift_ticks;  // cur index bound
  for (int i = 0; i <= last; ++i) {
    const int j = i + shift_ticks;
    if (i >= traj::KinematicProfile::kAccelValidFrom &&
        std::abs(prev.accel[j] - cur.accel[i]) > th.accel) {
      return 0;
    }
    if (i >= traj::KinematicProfile::kJerkValidFrom &&
        std::abs(prev.jerk[j] - cur.jerk[i]) > th.jerk) {
      return 0;
    }
    if (i >= 1 && std::abs(prev.yaw_rate[j] - cur.yaw_rate[i]) > th.yaw_rate) {
      return 0;
    }
    if (i >= 2 && std::abs(prev.yaw_accel[j] - cur.yaw_accel[i]) > th.yaw_accel) {
      return 0;
    }
  }
  return 1;
}

int extended_comfort_pair(const traj::Trajectory& prev,
                          const traj::Trajectory& cur, double shift,
                          const EcThresholds& thresholds) {
  const int shift_ticks = static_cast<int>(std::lround(shift / kDt));
  if (shift_ticks < 1 || shift_ticks >= kN) {
    throw ConfigError("extended_comfort_pair: shift outside the horizon");
  }
  const auto prev_profile = traj::compute_profile(prev);
  const auto cur_profile = traj::compute_profile(cur);
  return extended_comfort_pair(prev_profile, cur_profile, shift_ticks, thresholds);
}

namespace {

struct FrameSim {
  const world::ScenarioClip* clip;
  const world::Frame* frame;
  std::array<geom::Pose2, kN> world_pose;  // ego pose per tick, world frame
};

FrameSim make_frame_sim(const world::ScenarioClip& clip, int frame_index,
                        const traj::Trajectory& t) {
  FrameSim sim;
  sim.clip = &clip;
  sim.frame = &clip.frames.at(static_cast<std::size_t>(frame_index));
  for (int k = 0; k < kN; ++k) {
    sim.world_pose[k] = sim.frame->ego_pose.compose(t.waypoints[k]);
  }
  return sim;
}

bool rear_contact_exempt(const geom::Pose2& ego_pose,
                         const geom::OrientedBox& agent_box) {
  // Stationary-rear-contact rule: the contact direction is approximated by
  // the agent's center in the ego frame.
  return ego_pose.inverse_transform_point(agent_box.center.position()).x < 0.0;
}

bool check_no_collision(const FrameSim& sim, const world::EgoParams& params,
                        const std::array<double, kN>& speed) {
  for (int k = 0; k < kN; ++k) {
    const geom::OrientedBox ego_box{sim.world_pose[k], params.half_length,
                                    params.half_width};
    for (const auto& agent : sim.clip->agents) {
      const geom::OrientedBox agent_box = agent.box_at(sim.frame->tick + k);
      if (!geom::boxes_intersect(ego_box, agent_box)) continue;
      if (speed[k] < kStationarySpeed &&
          rear_contact_exempt(sim.world_pose[k], agent_box)) {
        continue;
      }
      return false;
    }
  }
  return true;
}

bool check_drivable(const FrameSim& sim, const world::EgoParams& params) {
  const geom::Polygon& drivable = sim.clip->map.drivable;
  for (int k = 0; k < kN; ++k) {
    const geom::OrientedBox ego_box{sim.world_pose[k], params.half_length,
                                    params.half_width};
    for (const geom::Vec2& corner : ego_box.corners()) {
      if (!drivable.contains(corner)) return false;
    }
  }
  return true;
}

/// Lane projection of a world point: nearest lane by distance, lowest index
/// on ties.
geom::PolylineProjection nearest_lane_projection(const world::MapModel& map,
                                                 geom::Vec2 p) {
  geom::PolylineProjection best;
  double best_d = std::numeric_limits<double>::infinity();
  for (const auto& lane : map.lanes) {
    const auto proj = lane.centerline.project(p);
    if (proj.distance < best_d) {
      best_d = proj.distance;
      best = proj;
    }
  }
  return best;
}

bool check_direction(const FrameSim& sim, const std::array<double, kN>& speed) {
  for (int k = 0; k < kN; ++k) {
    if (speed[k] <= kDirectionSpeedGate) continue;
    const int a = std::min(k, kN - 2);
    const geom::Vec2 motion =
        sim.world_pose[a + 1].position() - sim.world_pose[a].position();
    const auto proj =
        nearest_lane_projection(sim.clip->map, sim.world_pose[k].position());
    const geom::Vec2 tangent{std::cos(proj.tangent_heading),
                             std::sin(proj.tangent_heading)};
    if (motion.dot(tangent) < 0.0) return false;
  }
  return true;
}

bool check_lane_keep(const FrameSim& sim) {
  for (int k = 0; k < kN; ++k) {
    const auto proj =
        nearest_lane_projection(sim.clip->map, sim.world_pose[k].position());
    if (std::abs(proj.lateral) > kLaneKeepLimit) return false;
  }
  return true;
}

struct RouteTrace {
  std::array<double, kN> s;  // route arc length per tick
};

RouteTrace route_trace(const FrameSim& sim) {
  RouteTrace trace;
  const auto& route = sim.clip->map.route;
  for (int k = 0; k < kN; ++k) {
    trace.s[k] = route.project(sim.world_pose[k].position()).s;
  }
  return trace;
}

bool check_traffic_lights(const FrameSim& sim, const RouteTrace& trace) {
  if (sim.clip->map.stop_lines.empty()) return true;
  for (const auto& line : sim.clip->map.stop_lines) {
    for (int k = 1; k < kN; ++k) {
      const bool crosses = trace.s[k - 1] < line.route_s && trace.s[k] >= line.route_s;
      if (crosses && line.red_at(sim.frame->timestamp + k * kDt)) return false;
    }
  }
  return true;
}

bool check_time_to_collision(const FrameSim& sim, const world::EgoParams& params,
                             const std::array<double, kN>& speed) {
  if (sim.clip->agents.empty()) return true;
  const double tail_speed = speed[kN - 1];
  for (int k = 0; k < kN; ++k) {
    for (int j = 1; j <= kTtcProbeTicks; ++j) {
      geom::Pose2 ego_pose;
      if (k + j < kN) {
        ego_pose = sim.world_pose[k + j];
      } else {
        // Past the horizon the ego continues at the final state's velocity.
        const geom::Pose2& last = sim.world_pose[kN - 1];
        const geom::Vec2 adv =
            last.forward() * (tail_speed * (k + j - (kN - 1)) * kDt);
        ego_pose = geom::Pose2(last.x + adv.x, last.y + adv.y, last.heading);
      }
      const geom::OrientedBox ego_box{ego_pose, params.half_length,
                                      params.half_width};
      for (const auto& agent : sim.clip->agents) {
        const world::AgentState& st = agent.at_tick(sim.frame->tick + k);
        const geom::Vec2 adv = st.pose.forward() * (st.speed * j * kDt);
        const geom::OrientedBox agent_box{
            geom::Pose2(st.pose.x + adv.x, st.pose.y + adv.y, st.pose.heading),
            agent.half_length, agent.half_width};
        if (geom::boxes_intersect(ego_box, agent_box)) return false;
      }
    }
  }
  return true;
}

bool check_history_comfort(const FrameSim& sim,
                           const traj::KinematicProfile& profile,
                           const ComfortLimits& limits) {
  // Interior ticks use the standalone profile; the leading entries are
  // re-seeded from the frame's ego history.
  for (int k = 1; k < kN; ++k) {
    if (std::abs(profile.accel[k]) > limits.max_long_accel) return false;
  }
  for (int k = 2; k < kN; ++k) {
    if (std::abs(profile.jerk[k]) > limits.max_jerk) return false;
  }
  for (int k = 0; k < kN; ++k) {
    if (std::abs(profile.yaw_rate[k]) > limits.max_yaw_rate) return false;
    if (std::abs(profile.lat_accel[k]) > limits.max_lat_accel) return false;
  }
  for (int k = 1; k < kN; ++k) {
    if (std::abs(profile.yaw_accel[k]) > limits.max_yaw_accel) return false;
  }

  const world::Frame& frame = *sim.frame;
  const double a0 = (profile.speed[0] - frame.ego_speed) / kDt;
  const double j0 = (a0 - frame.ego_accel) / kDt;
  const double j1 = (profile.accel[1] - a0) / kDt;
  const double dw0 = profile.yaw_rate[0] / kDt;  // flat yaw-rate history
  if (std::abs(a0) > limits.max_long_accel) return false;
  if (std::abs(j0) > limits.max_jerk || std::abs(j1) > limits.max_jerk) {
    return false;
  }
  if (std::abs(dw0) > limits.max_yaw_accel) return false;
  return true;
}

}  // namespace

SimulatedRaw simulate_raw(const world::ScenarioClip& clip, int frame_index,
                          const traj::Trajectory& t,
                          const world::EgoParams& params,
                          const traj::KinematicProfile* profile,
                          const ComfortLimits& limits) {
  traj::KinematicProfile local;
  if (profile == nullptr) {
    local = traj::compute_profile(t);
    profile = &local;
  }
  const FrameSim sim = make_frame_sim(clip, frame_index, t);
  const RouteTrace trace = route_trace(sim);

  SimulatedRaw raw;
  raw.nc = check_no_collision(sim, params, profile->speed);
  raw.dac = check_drivable(sim, params);
  raw.ddc = check_direction(sim, profile->speed);
  raw.tlc = check_traffic_lights(sim, trace);
  raw.ttc = check_time_to_collision(sim, params, profile->speed);
  raw.lk = check_lane_keep(sim);
  raw.hc = check_history_comfort(sim, *profile, limits);
  raw.progress = trace.s[kN - 1] - trace.s[0];
  return raw;
}

double finalize_ep(double progress, double max_feasible_progress) {
  if (max_feasible_progress < kMinFeasibleProgress) return 1.0;
  return std::clamp(progress / max_feasible_progress, 0.0, 1.0);
}

MetricVector simulate_pair(const world::ScenarioClip& clip, int frame_index,
                           const traj::Trajectory& t,
                           const world::EgoParams& params,
                           double max_feasible_progress,
                           const traj::KinematicProfile* profile,
                           const ComfortLimits& limits) {
  const SimulatedRaw raw =
      simulate_raw(clip, frame_index, t, params, profile, limits);
  MetricVector mv;
  mv.nc = raw.nc ? 1 : 0;
  mv.dac = raw.dac ? 1 : 0;
  mv.ddc = raw.ddc ? 1 : 0;
  mv.tlc = raw.tlc ? 1 : 0;
  mv.ttc = raw.ttc ? 1 : 0;
  mv.lk = raw.lk ? 1 : 0;
  mv.hc = raw.hc ? 1 : 0;
  mv.ep = quantize_f32(finalize_ep(raw.progress, max_feasible_progress));
  mv.ec = 1;
  return mv;
}

std::vector<std::pair<int, int>> frame_index(const world::Dataset& dataset) {
  std::vector<std::pair<int, int>> out;
  for (std::size_t c = 0; c < dataset.clips.size(); ++c) {
    for (std::size_t f = 0; f < dataset.clips[c].frames.size(); ++f) {
      out.emplace_back(static_cast<int>(c), static_cast<int>(f));
    }
  }
  return out;
}

std::uint64_t dataset_content_hash(const world::Dataset& dataset) {
  // Identity is the canonical JSONL byte form, the same bytes save_dataset
  // writes to disk.
  const std::string bytes = world::serialize_dataset(dataset);
  return hash_bytes(bytes.data(), bytes.size());
}

namespace {
constexpr char kTableMagic[8] = {'Z', 'T', 'R', 'S', 'R', 'W', 'D', '1'};

void hash_table_payload(const RewardTable& table, Fnv1a64& h) {
  h.update_value(table.frame_count);
  h.update_value(table.action_count);
  h.update_value(table.dataset_hash);
  h.update_value(table.vocab_hash);
  for (const auto& mv : table.entries) {
    for (double v : {mv.nc, mv.dac, mv.ddc, mv.tlc, mv.ep, mv.ttc, mv.lk, mv.hc,
                     mv.ec}) {
      h.update_value(static_cast<float>(v));
    }
  }
}
}  // namespace

RewardTable build_reward_table(const world::Dataset& dataset,
                               const vocab::Vocabulary& vocab,
                               const world::EgoParams& params,
                               TableBuildStats* stats) {
  const auto frames = frame_index(dataset);
  RewardTable table;
  table.frame_count = static_cast<std::uint32_t>(frames.size());
  table.action_count = static_cast<std::uint32_t>(vocab.size());
  table.dataset_hash = dataset_content_hash(dataset);
  table.vocab_hash = vocab.content_hash;
  table.entries.resize(frames.size() * vocab.size());

  std::vector<traj::KinematicProfile> profiles;
  profiles.reserve(vocab.size());
  for (const auto& t : vocab.trajectories) {
    profiles.push_back(traj::compute_profile(t));
  }

  TableBuildStats local_stats;
  std::vector<SimulatedRaw> raws(vocab.size());
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const auto& [clip_idx, frame_idx] = frames[f];
    const auto& clip = dataset.clips[static_cast<std::size_t>(clip_idx)];
    double max_feasible = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < vocab.size(); ++a) {
      raws[a] = simulate_raw(clip, frame_idx, vocab.trajectories[a], params,
                             &profiles[a]);
      if (raws[a].nc && raws[a].dac && raws[a].ddc && raws[a].tlc) {
        max_feasible = std::max(max_feasible, raws[a].progress);
      }
    }
    if (max_feasible == -std::numeric_limits<double>::infinity()) {
      ++local_stats.frames_without_feasible_action;
    }
    for (std::size_t a = 0; a < vocab.size(); ++a) {
      const SimulatedRaw& raw = raws[a];
      MetricVector mv;
      mv.nc = raw.nc ? 1 : 0;
      mv.dac = raw.dac ? 1 : 0;
      mv.ddc = raw.ddc ? 1 : 0;
      mv.tlc = raw.tlc ? 1 : 0;
      mv.ttc = raw.ttc ? 1 : 0;
      mv.lk = raw.lk ? 1 : 0;
      mv.hc = raw.hc ? 1 : 0;
      mv.ep = quantize_f32(finalize_ep(raw.progress, max_feasible));
      mv.ec = 1;
      table.entries[f * vocab.size() + a] = mv;
    }
  }
  if (stats != nullptr) *stats = local_stats;
  return table;
}

void save_reward_table(const RewardTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open reward table for writing: " + path);
  BinaryWriter w(out);
  w.bytes(kTableMagic, sizeof(kTableMagic));
  w.u32(table.frame_count);
  w.u32(table.action_count);
  w.u64(table.dataset_hash);
  w.u64(table.vocab_hash);
  for (const auto& mv : table.entries) {
    for (double v : {mv.nc, mv.dac, mv.ddc, mv.tlc, mv.ep, mv.ttc, mv.lk, mv.hc,
                     mv.ec}) {
      w.f32(static_cast<float>(v));
    }
  }
  Fnv1a64 h;
  hash_table_payload(table, h);
  w.u64(h.digest());
}

RewardTable load_reward_table(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open reward table: " + path);
  BinaryReader r(in);
  char magic[8];
  r.bytes(magic, sizeof(magic));
  if (std::memcmp(magic, kTableMagic, sizeof(kTableMagic)) != 0) {
    throw FormatError("not a reward table file: " + path);
  }
  RewardTable table;
  table.frame_count = r.u32();
  table.action_count = r.u32();
  table.dataset_hash = r.u64();
  table.vocab_hash = r.u64();
  table.entries.resize(static_cast<std::size_t>(table.frame_count) *
                       table.action_count);
  for (auto& mv : table.entries) {
    mv.nc = r.f32();
    mv.dac = r.f32();
    mv.ddc = r.f32();
    mv.tlc = r.f32();
    mv.ep = r.f32();
    mv.ttc = r.f32();
    mv.lk = r.f32();
    mv.hc = r.f32();
    mv.ec = r.f32();
  }
  const std::uint64_t stored = r.u64();
  Fnv1a64 h;
  hash_table_payload(table, h);
  if (h.digest() != stored) {
    throw HashMismatchError("reward table content hash mismatch in " + path,
                            stored, h.digest());
  }
  return table;
}

double hd_score(const std::vector<StepMetrics>& steps, double rc, double w_ttc,
                double w_hc) {
  if (steps.empty()) throw ConfigError("hd_score requires at least one tick");
  if (w_ttc + w_hc <= 0.0) throw ConfigError("hd_score weights must be positive");
  double acc = 0.0;
  for (const auto& s : steps) {
    acc += s.nc * s.dac * (w_ttc * s.ttc + w_hc * s.hc) / (w_ttc + w_hc);
  }
  return rc * acc / static_cast<double>(steps.size());
}

}  // namespace epo::reward
