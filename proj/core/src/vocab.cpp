#include "epo/vocab.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <Eigen/Dense>

#include "epo/common.hpp"

namespace epo::vocab {

namespace {

constexpr char kMagic[8] = {'Z', 'T', 'R', 'S', 'V', 'O', 'C', '1'};
constexpr int kDim = 2 * traj::kWaypointCount;  // flattened (x, y) positions

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Matrix flatten_all(const std::vector<traj::Trajectory>& trajs) {
  Matrix m(static_cast<Eigen::Index>(trajs.size()), kDim);
  for (std::size_t i = 0; i < trajs.size(); ++i) {
    for (int k = 0; k < traj::kWaypointCount; ++k) {
      m(static_cast<Eigen::Index>(i), 2 * k) = trajs[i].waypoints[k].x;
      m(static_cast<Eigen::Index>(i), 2 * k + 1) = trajs[i].waypoints[k].y;
    }
  }
  return m;
}

/// Squared RMS waypoint distance between every row of `points` and every row
/// of `centers` (N x K), clamped at zero against rounding.
Matrix squared_distances(const Matrix& points, const Matrix& centers) {
  const Eigen::VectorXd p2 = points.rowwise().squaredNorm();
  const Eigen::VectorXd c2 = centers.rowwise().squaredNorm();
  Matrix d2 = -2.0 * (points * centers.transpose());
  d2.colwise() += p2;
  d2.rowwise() += c2.transpose();
  return d2.cwiseMax(0.0) / traj::kWaypointCount;
}

}  // namespace

std::vector<traj::Trajectory> sample_candidates(int count,
                                                const world::EgoParams& params,
                                                std::uint64_t seed) {
  if (count < 1) throw ConfigError("sample_candidates requires count >= 1");
  Rng rng(seed);
  std::vector<traj::Trajectory> out;
  out.reserve(static_cast<std::size_t>(count));

  auto rollout = [&](double v0, world::Control first, world::Control second) {
    traj::Trajectory t;
    double x = 0.0, y = 0.0, h = 0.0, v = v0;
    for (int k = 0; k < traj::kWaypointCount; ++k) {
      t.waypoints[k] = geom::Pose2(x, y, h);
      const world::Control& c = k < traj::kWaypointCount / 2 ? first : second;
      x += std::cos(h) * v * traj::kTickSeconds;
      y += std::sin(h) * v * traj::kTickSeconds;
      h = geom::wrap_angle(h + v / params.wheelbase * std::tan(c.steer) *
                                   traj::kTickSeconds);
      v = std::clamp(v + c.accel * traj::kTickSeconds, 0.0, params.max_speed);
    }
    return t;
  };

  // Candidate 0 is the exact stay-stopped plan so the action space always
  // contains a penalty-free fallback.
  out.push_back(rollout(0.0, {-1.0, 0.0}, {-1.0, 0.0}));

  auto sample_steer = [&]() {
    // Cubic shaping concentrates candidates near straight driving while
    // still covering the full steering range.
    const double u = rng.uniform(-1.0, 1.0);
    return params.max_steer * u * u * u;
  };
  while (out.size() < static_cast<std::size_t>(count)) {
    const double v0 = rng.uniform(0.0, params.max_speed);
    const world::Control first{rng.uniform(-params.max_brake, params.max_accel),
                               sample_steer()};
    const world::Control second{rng.uniform(-params.max_brake, params.max_accel),
                                sample_steer()};
    out.push_back(rollout(v0, first, second));
  }
  return out;
}

std::vector<traj::Trajectory> kmeans_cluster(
    const std::vector<traj::Trajectory>& candidates, int k, std::uint64_t seed,
    int max_iters) {
  const int n = static_cast<int>(candidates.size());
  if (k < 1 || k > n) {
    std::ostringstream os;
    os << "kmeans_cluster: k = " << k << " exceeds candidate count " << n;
    throw ConfigError(os.str());
  }

  const Matrix points = flatten_all(candidates);
  Rng rng(seed);

  // k-means++ seeding.
  Matrix centers(k, kDim);
  std::vector<double> min_d2(static_cast<std::size_t>(n),
                             std::numeric_limits<double>::infinity());
  {
    const int first = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(n)));
    centers.row(0) = points.row(first);
    for (int c = 1; c < k; ++c) {
      double total = 0.0;
      for (int i = 0; i < n; ++i) {
        const double d2 =
            (points.row(i) - centers.row(c - 1)).squaredNorm() / traj::kWaypointCount;
        min_d2[static_cast<std::size_t>(i)] =
            std::min(min_d2[static_cast<std::size_t>(i)], d2);
        total += min_d2[static_cast<std::size_t>(i)];
      }
      int chosen = 0;
      if (total > 0.0) {
        const double u = rng.uniform01() * total;
        double acc = 0.0;
        chosen = n - 1;
        for (int i = 0; i < n; ++i) {
          acc += min_d2[static_cast<std::size_t>(i)];
          if (u < acc) {
            chosen = i;
            break;
          }
        }
      } else {
        chosen = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(n)));
      }
      centers.row(c) = points.row(chosen);
    }
  }

  std::vector<int> assignment(static_cast<std::size_t>(n), -1);
  for (int iter = 0; iter < max_iters; ++iter) {
    const Matrix d2 = squared_distances(points, centers);
    bool changed = false;
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double best_d = d2(i, 0);
      for (int c = 1; c < k; ++c) {
        if (d2(i, c) < best_d) {
          best_d = d2(i, c);
          best = c;
        }
      }
      if (assignment[static_cast<std::size_t>(i)] != best) {
        assignment[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
    }
    if (!changed) break;

    Matrix sums = Matrix::Zero(k, kDim);
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (int i = 0; i < n; ++i) {
      sums.row(assignment[static_cast<std::size_t>(i)]) += points.row(i);
      ++counts[static_cast<std::size_t>(assignment[static_cast<std::size_t>(i)])];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        centers.row(c) = sums.row(c) / counts[static_cast<std::size_t>(c)];
      } else {
        // Re-seed an empty cluster with the point farthest from its center.
        int far_i = 0;
        double far_d = -1.0;
        for (int i = 0; i < n; ++i) {
          const double d =
              (points.row(i) - centers.row(assignment[static_cast<std::size_t>(i)]))
                  .squaredNorm();
          if (d > far_d) {
            far_d = d;
            far_i = i;
          }
        }
        centers.row(c) = points.row(far_i);
      }
    }
  }

  // Medoid snap: member nearest its centroid, ties to the lowest index.
  std::vector<int> medoid(static_cast<std::size_t>(k), -1);
  std::vector<double> medoid_d(static_cast<std::size_t>(k),
                               std::numeric_limits<double>::infinity());
  for (int i = 0; i < n; ++i) {
    const int c = assignment[static_cast<std::size_t>(i)];
    const double d = (points.row(i) - centers.row(c)).squaredNorm();
    if (d < medoid_d[static_cast<std::size_t>(c)]) {
      medoid_d[static_cast<std::size_t>(c)] = d;
      medoid[static_cast<std::size_t>(c)] = i;
    }
  }

  std::vector<traj::Trajectory> out;
  out.reserve(static_cast<std::size_t>(k));
  for (int c = 0; c < k; ++c) {
    if (medoid[static_cast<std::size_t>(c)] < 0) {
      throw ConfigError("kmeans_cluster produced an empty cluster");
    }
    out.push_back(candidates[static_cast<std::size_t>(medoid[static_cast<std::size_t>(c)])]);
  }
  return out;
}

Vocabulary farthest_point_order(std::vector<traj::Trajectory> trajectories) {
  const int n = static_cast<int>(trajectories.size());
  if (n < 1) throw ConfigError("farthest_point_order requires a non-empty list");
  for (auto& t : trajectories) t.quantize_f32();

  const Matrix points = flatten_all(trajectories);
  auto dist = [&](int i, int j) {
    return std::sqrt((points.row(i) - points.row(j)).squaredNorm() /
                     traj::kWaypointCount);
  };

  // Item 0: minimal mean distance to all others.
  int start = 0;
  if (n > 1) {
    double best_sum = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      double sum = 0.0;
      for (int j = 0; j < n; ++j) sum += dist(i, j);
      if (sum < best_sum) {
        best_sum = sum;
        start = i;
      }
    }
  }

  std::vector<int> order;
  order.reserve(static_cast<std::size_t>(n));
  std::vector<double> min_dist(static_cast<std::size_t>(n),
                               std::numeric_limits<double>::infinity());
  std::vector<bool> placed(static_cast<std::size_t>(n), false);
  order.push_back(start);
  placed[static_cast<std::size_t>(start)] = true;

  while (static_cast<int>(order.size()) < n) {
    const int last = order.back();
    int next = -1;
    double next_d = -1.0;
    for (int i = 0; i < n; ++i) {
      if (placed[static_cast<std::size_t>(i)]) continue;
      auto& md = min_dist[static_cast<std::size_t>(i)];
      md = std::min(md, dist(i, last));
      if (md > next_d) {  // strict: ties keep the lowest original index
        next_d = md;
        next = i;
      }
    }
    if (next_d <= 0.0) {
      throw ConfigError("vocabulary contains duplicate trajectories");
    }
    order.push_back(next);
    placed[static_cast<std::size_t>(next)] = true;
  }

  Vocabulary vocab;
  vocab.trajectories.reserve(static_cast<std::size_t>(n));
  Fnv1a64 h;
  for (int idx : order) {
    const auto& t = trajectories[static_cast<std::size_t>(idx)];
    vocab.trajectories.push_back(t);
    for (const auto& wp : t.waypoints) {
      h.update_value(static_cast<float>(wp.x));
      h.update_value(static_cast<float>(wp.y));
      h.update_value(static_cast<float>(wp.heading));
    }
  }
  vocab.content_hash = h.digest();
  return vocab;
}

Vocabulary build_vocabulary(int candidate_count, int n,
                            const world::EgoParams& params, std::uint64_t seed) {
  auto candidates = sample_candidates(candidate_count, params, split_seed(seed, 0));
  auto medoids = kmeans_cluster(candidates, n, split_seed(seed, 1));
  return farthest_point_order(std::move(medoids));
}

void save_vocabulary(const Vocabulary& vocab, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open vocabulary file for writing: " + path);
  BinaryWriter w(out);
  w.bytes(kMagic, sizeof(kMagic));
  w.u32(static_cast<std::uint32_t>(vocab.size()));
  w.u32(traj::kWaypointCount);
  for (const auto& t : vocab.trajectories) {
    for (const auto& wp : t.waypoints) {
      w.f32(static_cast<float>(wp.x));
      w.f32(static_cast<float>(wp.y));
      w.f32(static_cast<float>(wp.heading));
    }
  }
  w.u64(vocab.content_hash);
}

Vocabulary load_vocabulary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open vocabulary file: " + path);
  BinaryReader r(in);
  char magic[8];
  r.bytes(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw FormatError("not a vocabulary file: " + path);
  }
  const std::uint32_t n = r.u32();
  const std::uint32_t wp_count = r.u32();
  if (wp_count != traj::kWaypointCount) {
    throw FormatError("unexpected waypoint count in vocabulary file");
  }
  Vocabulary vocab;
  vocab.trajectories.resize(n);
  Fnv1a64 h;
  for (auto& t : vocab.trajectories) {
    for (auto& wp : t.waypoints) {
      const float x = r.f32(), y = r.f32(), heading = r.f32();
      h.update_value(x);
      h.update_value(y);
      h.update_value(heading);
      // Assign fields directly: re-normalizing the heading could perturb
      // f32 values sitting right at pi.
      wp.x = x;
      wp.y = y;
      wp.heading = heading;
    }
  }
  vocab.content_hash = r.u64();
  if (h.digest() != vocab.content_hash) {
    throw HashMismatchError("vocabulary content hash mismatch in " + path,
                            vocab.content_hash, h.digest());
  }
  return vocab;
}

}  // namespace epo::vocab
