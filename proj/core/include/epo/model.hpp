#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "epo/common.hpp"
#include "epo/trajectory.hpp"
#include "epo/world.hpp"

namespace epo::model {

struct ModelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Rasterized scene input

inline constexpr int kRasterSize = 64;      // cells per side
inline constexpr int kRasterChannels = 6;
inline constexpr double kRasterMeters = 64.0;
inline constexpr double kRasterForward = 24.0;  // grid center ahead of ego
inline constexpr double kSpeedNorm = 15.0;

/// Ego-aligned occupancy grid: drivable, route, agents now, agents in 1 s,
/// red stop lines, normalized ego speed. Values in [0, 1].
struct RasterScene {
  std::array<float, kRasterChannels * kRasterSize * kRasterSize> cells{};

  float& at(int c, int row, int col) {
    return cells[static_cast<std::size_t>((c * kRasterSize + row) * kRasterSize +
                                          col)];
  }
  float at(int c, int row, int col) const {
    return cells[static_cast<std::size_t>((c * kRasterSize + row) * kRasterSize +
                                          col)];
  }
};

RasterScene rasterize(const world::ScenarioClip& clip, int frame_index);

/// Cell-center position in the ego frame (row indexes forward/x, col left/y).
geom::Vec2 raster_cell_center(int row, int col);

// ---------------------------------------------------------------------------
// Trajectory descriptor

inline constexpr int kDescriptorDim = 32;

/// Eight waypoints (every 5th, ending at the horizon), each contributing
/// (x/32, y/32, cos heading, sin heading).
std::array<double, kDescriptorDim> tokenize_trajectory(const traj::Trajectory& t);

// ---------------------------------------------------------------------------
// Scorer model

struct ModelConfig {
  int d_model = 64;
  int patch = 16;  // raster cells per patch side
  int heads = 4;
  int blocks = 2;
  int ff_dim = 256;
  int metric_heads = 9;
  std::uint64_t init_seed = 0;

  int grid() const { return kRasterSize / patch; }
  int scene_tokens() const { return grid() * grid(); }
  int patch_dim() const { return patch * patch * kRasterChannels; }
  int head_dim() const { return d_model / heads; }

  void validate() const {
    if (kRasterSize % patch != 0) throw ConfigError("patch must divide 64");
    if (d_model % heads != 0) throw ConfigError("heads must divide d_model");
    if (blocks < 1 || ff_dim < 1 || metric_heads < 1) {
      throw ConfigError("invalid model dimensions");
    }
  }
};

template <typename Real>
using RowMat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// The trainable tensors. Gradient buffers reuse the same type with the same
/// shapes.
template <typename Real>
struct ScorerModelT {
  using Mat = RowMat<Real>;

  ModelConfig config;

  Mat patch_w, patch_b;  // patch_dim x d, 1 x d
  Mat pos;               // L x d
  Mat traj_w, traj_b;    // 32 x d, 1 x d

  struct Block {
    Mat lnq_g, lnq_b;    // 1 x d, queries pre-norm
    Mat lnkv_g, lnkv_b;  // 1 x d, scene pre-norm
    Mat wq, wk, wv, wo;  // d x d
    Mat bq, bk, bv, bo;  // 1 x d
    Mat ln2_g, ln2_b;    // 1 x d
    Mat ff1, ff1_b;      // d x ff, 1 x ff
    Mat ff2, ff2_b;      // ff x d, 1 x d
  };
  std::vector<Block> blocks;

  Mat policy_w, policy_b;  // 1 x d, 1 x 1
  Mat score_w, score_b;    // m x d, 1 x m

  /// Stable name -> tensor enumeration; defines checkpoint and update order.
  std::vector<std::pair<std::string, Mat*>> tensors();
  std::vector<std::pair<std::string, const Mat*>> tensors() const;

  std::size_t parameter_count() const;
  bool all_finite() const;
};

/// Allocates shapes and applies the seeded init: uniform
/// +-sqrt(6/(fan_in+fan_out)) for linear maps, normal(0, 0.02) positional
/// vectors, zero biases, unit layer-norm gains.
template <typename Real>
ScorerModelT<Real> make_model(const ModelConfig& config);

/// Same-shape zero tensors for gradient accumulation.
template <typename Real>
ScorerModelT<Real> make_zero_like(const ScorerModelT<Real>& m);

// ---------------------------------------------------------------------------
// Forward / backward

template <typename Real>
struct Tape {
  using Mat = RowMat<Real>;

  int n = 0;  // trajectory count

  Mat patches;      // L x patch_dim
  Mat descriptors;  // n x 32
  Mat scene;        // S0 = patch embed + pos, L x d
  Mat scene_hat;    // row-normalized S0
  Mat scene_rstd;   // L x 1

  struct BlockTape {
    Mat x_in;                  // n x d
    Mat x_hat, x_rstd;         // LNq intermediates
    Mat sk;                    // LNkv output, L x d
    Mat q, k, v;               // n x d, L x d, L x d
    std::vector<Mat> attn;     // per head, n x L
    Mat head_concat;           // n x d
    Mat x_mid;                 // after attention residual
    Mat mid_hat, mid_rstd;     // LN2 intermediates
    Mat z1;                    // n x ff, pre-activation
    Mat relu;                  // n x ff
  };
  std::vector<BlockTape> blocks;
  Mat x_out;  // n x d, decoder output
};

template <typename Real>
struct ForwardResult {
  Eigen::Matrix<Real, Eigen::Dynamic, 1> policy_logits;  // n
  RowMat<Real> score_logits;                             // n x m
};

/// Builds the L x patch_dim patch matrix from a raster.
template <typename Real>
RowMat<Real> extract_patches(const RasterScene& scene, const ModelConfig& config);

/// Deterministic forward pass over `descriptors` (one row per trajectory).
/// When `tape` is non-null every intermediate needed by backward is retained.
/// Non-finite activations abort with the offending layer's name.
template <typename Real>
ForwardResult<Real> forward(const ScorerModelT<Real>& m, const RasterScene& scene,
                            const RowMat<Real>& descriptors, Tape<Real>* tape);

/// Exact reverse-mode gradients of the forward pass; `grads` accumulates
/// (callers zero it when they want fresh gradients).
template <typename Real>
void backward(const ScorerModelT<Real>& m, const Tape<Real>& tape,
              const Eigen::Matrix<Real, Eigen::Dynamic, 1>& d_policy_logits,
              const RowMat<Real>& d_score_logits, ScorerModelT<Real>& grads);

/// Numerically stable softmax evaluated in double regardless of Real.
template <typename Real>
Eigen::VectorXd stable_softmax(const Eigen::Matrix<Real, Eigen::Dynamic, 1>& logits);

inline double sigmoid(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

/// Descriptor matrix for a vocabulary prefix.
template <typename Real>
RowMat<Real> descriptor_matrix(const std::vector<traj::Trajectory>& trajectories,
                               int prefix);

using ScorerModel = ScorerModelT<float>;

// ---------------------------------------------------------------------------
// Checkpoints (f32 on disk; the float model round-trips bit-exactly)

struct AdamStateTensors {
  std::vector<std::pair<std::string, RowMat<float>>> m;
  std::vector<std::pair<std::string, RowMat<float>>> v;
};

struct Checkpoint {
  ModelConfig config;
  ScorerModel model;
  AdamStateTensors opt;
  std::uint64_t step = 0;
  std::string config_echo;  // JSON: training config, artifact hashes
  std::uint64_t content_hash = 0;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace epo::model

#include "epo/model_impl.hpp"
