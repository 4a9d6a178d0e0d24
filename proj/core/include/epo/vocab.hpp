#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "epo/trajectory.hpp"
#include "epo/world.hpp"

namespace epo::vocab {

/// The fixed action space: trajectories in farthest-point order, so every
/// prefix is a diversity-maximizing sub-vocabulary.
struct Vocabulary {
  std::vector<traj::Trajectory> trajectories;
  std::uint64_t content_hash = 0;

  std::size_t size() const { return trajectories.size(); }
};

/// Kinematically feasible candidate pool: piecewise-constant-control bicycle
/// rollouts (two 2 s control segments, accel in [-4, 3] m/s^2, steer within
/// bounds, initial speeds in [0, 15] m/s). Candidate 0 is the exact
/// stay-stopped plan.
std::vector<traj::Trajectory> sample_candidates(int count,
                                                const world::EgoParams& params,
                                                std::uint64_t seed);

/// Lloyd iterations with k-means++ seeding over the RMS waypoint-position
/// metric; each returned trajectory is the cluster member nearest its
/// centroid, so outputs stay feasible.
std::vector<traj::Trajectory> kmeans_cluster(
    const std::vector<traj::Trajectory>& candidates, int k, std::uint64_t seed,
    int max_iters = 50);

/// Orders trajectories so item 0 is the set medoid and each later item
/// maximizes its minimum distance to everything placed before it. Quantizes
/// waypoints to f32 and computes the content hash.
Vocabulary farthest_point_order(std::vector<traj::Trajectory> trajectories);

/// Convenience: sample -> cluster -> order, deterministic per (seed, n).
Vocabulary build_vocabulary(int candidate_count, int n,
                            const world::EgoParams& params, std::uint64_t seed);

void save_vocabulary(const Vocabulary& vocab, const std::string& path);
Vocabulary load_vocabulary(const std::string& path);

}  // namespace epo::vocab
