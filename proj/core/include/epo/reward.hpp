#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "epo/trajectory.hpp"
#include "epo/vocab.hpp"
#include "epo/world.hpp"

namespace epo::reward {

/// The nine per-(state, action) sub-scores. nc/dac/ddc/tlc are the
/// multiplicative penalties; ttc/ep/lk/hc/ec enter the weighted average.
struct MetricVector {
  double nc = 1, dac = 1, ddc = 1, tlc = 1;
  double ep = 1;
  double ttc = 1, lk = 1, hc = 1;
  double ec = 1;

  bool operator==(const MetricVector&) const = default;
};

struct MetricWeights {
  double w_ttc = 5, w_ep = 5, w_lk = 2, w_hc = 2, w_ec = 2;

  static MetricWeights checked(double ttc, double ep, double lk, double hc,
                               double ec);
  double sum() const { return w_ttc + w_ep + w_lk + w_hc + w_ec; }
};

/// Multiplicative penalties times the weighted average of the graded metrics.
double aggregate_epdms(const MetricVector& mv, const MetricWeights& w);

/// Comfort bounds checked by the HC metric (nuPlan-style limits).
struct ComfortLimits {
  double max_long_accel = 2.4;   // m/s^2
  double max_lat_accel = 4.89;   // m/s^2
  double max_jerk = 8.37;        // m/s^3
  double max_yaw_rate = 0.95;    // rad/s
  double max_yaw_accel = 1.93;   // rad/s^2
};

/// Per-tick deltas between consecutive plans tolerated by Extended Comfort.
struct EcThresholds {
  double accel = 1.0;      // m/s^2
  double jerk = 2.0;       // m/s^3
  double yaw_rate = 0.2;   // rad/s
  double yaw_accel = 0.4;  // rad/s^2
};

/// 1 if the current plan continues the previous plan's kinematic profile
/// within the EC thresholds over the overlapping window, else 0. Symmetric in
/// the aligned profiles (absolute differences).
int extended_comfort_pair(const traj::Trajectory& prev,
                          const traj::Trajectory& cur,
                          double shift = world::kReplanSeconds,
                          const EcThresholds& thresholds = {});
int extended_comfort_pair(const traj::KinematicProfile& prev,
                          const traj::KinematicProfile& cur, int shift_ticks,
                          const EcThresholds& thresholds = {});

/// Raw per-pair simulation result; ep is finalized later because its
/// normalizer spans the whole action space.
struct SimulatedRaw {
  bool nc = true, dac = true, ddc = true, tlc = true;
  bool ttc = true, lk = true, hc = true;
  double progress = 0.0;  // route arc length gained over the horizon
};

/// Rolls the ego along an ego-frame trajectory against the frame's scripted
/// agents and map. `profile` may pass a precomputed kinematic profile.
SimulatedRaw simulate_raw(const world::ScenarioClip& clip, int frame_index,
                          const traj::Trajectory& t,
                          const world::EgoParams& params,
                          const traj::KinematicProfile* profile = nullptr,
                          const ComfortLimits& limits = {});

/// Full metric vector for one (frame, action) pair; ec is left at 1.
/// `max_feasible_progress` is the per-frame maximum progress among actions
/// with all four penalties intact (ep = 1 when it is below 5 m).
MetricVector simulate_pair(const world::ScenarioClip& clip, int frame_index,
                           const traj::Trajectory& t,
                           const world::EgoParams& params,
                           double max_feasible_progress,
                           const traj::KinematicProfile* profile = nullptr,
                           const ComfortLimits& limits = {});

double finalize_ep(double progress, double max_feasible_progress);

// ---------------------------------------------------------------------------
// Reward table

/// Flattened (clip, frame) pairs in dataset order; the table's frame axis.
std::vector<std::pair<int, int>> frame_index(const world::Dataset& dataset);

/// Canonical dataset identity: hash of its serialized JSONL form.
std::uint64_t dataset_content_hash(const world::Dataset& dataset);

struct RewardTable {
  std::uint32_t frame_count = 0;
  std::uint32_t action_count = 0;
  std::uint64_t dataset_hash = 0;
  std::uint64_t vocab_hash = 0;
  std::vector<MetricVector> entries;  // frame-major

  const MetricVector& at(std::size_t frame, std::size_t action) const {
    return entries[frame * action_count + action];
  }
};

struct TableBuildStats {
  int frames_without_feasible_action = 0;
};

RewardTable build_reward_table(const world::Dataset& dataset,
                               const vocab::Vocabulary& vocab,
                               const world::EgoParams& params,
                               TableBuildStats* stats = nullptr);

void save_reward_table(const RewardTable& table, const std::string& path);
RewardTable load_reward_table(const std::string& path);

// ---------------------------------------------------------------------------
// Closed-loop aggregation

struct StepMetrics {
  double nc = 1, dac = 1, ttc = 1, hc = 1;
};

/// Route completion times the per-tick mean of (nc*dac) * weighted(ttc, hc).
double hd_score(const std::vector<StepMetrics>& steps, double rc, double w_ttc,
                double w_hc);

}  // namespace epo::reward
