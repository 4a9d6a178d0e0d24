#pragma once

// Template implementation detail of model.hpp; do not include directly.

namespace epo::model {

namespace detail {

inline constexpr double kLayerNormEps = 1e-5;

template <typename Real>
void check_finite(const RowMat<Real>& m, const char* layer) {
  if (!m.allFinite()) {
    throw ModelError(std::string("non-finite activations in ") + layer);
  }
}

/// Row-wise layer norm. Writes x_hat (normalized rows) and rstd; returns
/// x_hat * g + b.
template <typename Real>
RowMat<Real> layer_norm(const RowMat<Real>& x, const RowMat<Real>& g,
                        const RowMat<Real>& b, RowMat<Real>& x_hat,
                        RowMat<Real>& rstd) {
  const Eigen::Index rows = x.rows(), cols = x.cols();
  x_hat.resize(rows, cols);
  rstd.resize(rows, 1);
  RowMat<Real> out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Real mean = x.row(i).mean();
    const Real var = (x.row(i).array() - mean).square().mean();
    const Real r = Real(1) / std::sqrt(var + Real(kLayerNormEps));
    rstd(i, 0) = r;
    x_hat.row(i) = ((x.row(i).array() - mean) * r).matrix();
    out.row(i) = x_hat.row(i).cwiseProduct(g.row(0)) + b.row(0);
  }
  return out;
}

/// Gradient of layer_norm w.r.t. its input; accumulates parameter gradients.
template <typename Real>
void layer_norm_backward(const RowMat<Real>& d_out, const RowMat<Real>& x_hat,
                         const RowMat<Real>& rstd, const RowMat<Real>& g,
                         RowMat<Real>& d_in_accum, RowMat<Real>& dg,
                         RowMat<Real>& db) {
  const Eigen::Index rows = d_out.rows(), cols = d_out.cols();
  for (Eigen::Index i = 0; i < rows; ++i) {
    dg.row(0) += d_out.row(i).cwiseProduct(x_hat.row(i));
    db.row(0) += d_out.row(i);
    const auto gdy = d_out.row(i).cwiseProduct(g.row(0));
    const Real m1 = gdy.mean();
    const Real m2 = gdy.cwiseProduct(x_hat.row(i)).mean();
    d_in_accum.row(i) +=
        ((gdy.array() - m1) - x_hat.row(i).array() * m2).matrix() * rstd(i, 0);
  }
  (void)cols;
}

/// Row-wise softmax with max subtraction, in Real.
template <typename Real>
RowMat<Real> softmax_rows(const RowMat<Real>& z) {
  RowMat<Real> out(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const Real mx = z.row(i).maxCoeff();
    out.row(i) = (z.row(i).array() - mx).exp();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

}  // namespace detail

template <typename Real>
std::vector<std::pair<std::string, RowMat<Real>*>> ScorerModelT<Real>::tensors() {
  std::vector<std::pair<std::string, Mat*>> out;
  out.emplace_back("patch_w", &patch_w);
  out.emplace_back("patch_b", &patch_b);
  out.emplace_back("pos", &pos);
  out.emplace_back("traj_w", &traj_w);
  out.emplace_back("traj_b", &traj_b);
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const std::string p = "block" + std::to_string(b) + ".";
    Block& blk = blocks[b];
    out.emplace_back(p + "lnq_g", &blk.lnq_g);
    out.emplace_back(p + "lnq_b", &blk.lnq_b);
    out.emplace_back(p + "lnkv_g", &blk.lnkv_g);
    out.emplace_back(p + "lnkv_b", &blk.lnkv_b);
    out.emplace_back(p + "wq", &blk.wq);
    out.emplace_back(p + "bq", &blk.bq);
    out.emplace_back(p + "wk", &blk.wk);
    out.emplace_back(p + "bk", &blk.bk);
    out.emplace_back(p + "wv", &blk.wv);
    out.emplace_back(p + "bv", &blk.bv);
    out.emplace_back(p + "wo", &blk.wo);
    out.emplace_back(p + "bo", &blk.bo);
    out.emplace_back(p + "ln2_g", &blk.ln2_g);
    out.emplace_back(p + "ln2_b", &blk.ln2_b);
    out.emplace_back(p + "ff1", &blk.ff1);
    out.emplace_back(p + "ff1_b", &blk.ff1_b);
    out.emplace_back(p + "ff2", &blk.ff2);
    out.emplace_back(p + "ff2_b", &blk.ff2_b);
  }
  out.emplace_back("policy_w", &policy_w);
  out.emplace_back("policy_b", &policy_b);
  out.emplace_back("score_w", &score_w);
  out.emplace_back("score_b", &score_b);
  return out;
}

template <typename Real>
std::vector<std::pair<std::string, const RowMat<Real>*>>
ScorerModelT<Real>::tensors() const {
  auto mutable_list = const_cast<ScorerModelT<Real>*>(this)->tensors();
  std::vector<std::pair<std::string, const Mat*>> out;
  out.reserve(mutable_list.size());
  for (auto& [name, ptr] : mutable_list) out.emplace_back(name, ptr);
  return out;
}

template <typename Real>
std::size_t ScorerModelT<Real>::parameter_count() const {
  std::size_t count = 0;
  for (const auto& [name, t] : tensors()) count += static_cast<std::size_t>(t->size());
  return count;
}

template <typename Real>
bool ScorerModelT<Real>::all_finite() const {
  for (const auto& [name, t] : tensors()) {
    if (!t->allFinite()) return false;
  }
  return true;
}

template <typename Real>
ScorerModelT<Real> make_model(const ModelConfig& config) {
  config.validate();
  ScorerModelT<Real> m;
  m.config = config;
  const int d = config.d_model, L = config.scene_tokens(), ff = config.ff_dim;

  m.patch_w.resize(config.patch_dim(), d);
  m.patch_b = RowMat<Real>::Zero(1, d);
  m.pos.resize(L, d);
  m.traj_w.resize(kDescriptorDim, d);
  m.traj_b = RowMat<Real>::Zero(1, d);
  m.blocks.resize(static_cast<std::size_t>(config.blocks));
  for (auto& blk : m.blocks) {
    blk.lnq_g = RowMat<Real>::Ones(1, d);
    blk.lnq_b = RowMat<Real>::Zero(1, d);
    blk.lnkv_g = RowMat<Real>::Ones(1, d);
    blk.lnkv_b = RowMat<Real>::Zero(1, d);
    blk.wq.resize(d, d);
    blk.wk.resize(d, d);
    blk.wv.resize(d, d);
    blk.wo.resize(d, d);
    blk.bq = RowMat<Real>::Zero(1, d);
    blk.bk = RowMat<Real>::Zero(1, d);
    blk.bv = RowMat<Real>::Zero(1, d);
    blk.bo = RowMat<Real>::Zero(1, d);
    blk.ln2_g = RowMat<Real>::Ones(1, d);
    blk.ln2_b = RowMat<Real>::Zero(1, d);
    blk.ff1.resize(d, ff);
    blk.ff1_b = RowMat<Real>::Zero(1, ff);
    blk.ff2.resize(ff, d);
    blk.ff2_b = RowMat<Real>::Zero(1, d);
  }
  m.policy_w.resize(1, d);
  m.policy_b = RowMat<Real>::Zero(1, 1);
  m.score_w.resize(config.metric_heads, d);
  m.score_b = RowMat<Real>::Zero(1, config.metric_heads);

  Rng rng(config.init_seed);
  auto init_linear = [&rng](RowMat<Real>& w, int fan_in, int fan_out) {
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) {
        w(i, j) = static_cast<Real>(rng.uniform(-bound, bound));
      }
    }
  };
  init_linear(m.patch_w, config.patch_dim(), d);
  for (Eigen::Index i = 0; i < m.pos.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.pos.cols(); ++j) {
      m.pos(i, j) = static_cast<Real>(0.02 * rng.normal());
    }
  }
  init_linear(m.traj_w, kDescriptorDim, d);
  for (auto& blk : m.blocks) {
    init_linear(blk.wq, d, d);
    init_linear(blk.wk, d, d);
    init_linear(blk.wv, d, d);
    init_linear(blk.wo, d, d);
    init_linear(blk.ff1, d, ff);
    init_linear(blk.ff2, ff, d);
  }
  init_linear(m.policy_w, d, 1);
  init_linear(m.score_w, d, config.metric_heads);
  return m;
}

template <typename Real>
ScorerModelT<Real> make_zero_like(const ScorerModelT<Real>& src) {
  ScorerModelT<Real> z = src;
  for (auto& [name, t] : z.tensors()) t->setZero();
  return z;
}

template <typename Real>
RowMat<Real> extract_patches(const RasterScene& scene, const ModelConfig& config) {
  const int grid = config.grid(), patch = config.patch;
  RowMat<Real> out(config.scene_tokens(), config.patch_dim());
  for (int pr = 0; pr < grid; ++pr) {
    for (int pc = 0; pc < grid; ++pc) {
      const int token = pr * grid + pc;
      int f = 0;
      for (int c = 0; c < kRasterChannels; ++c) {
        for (int rr = 0; rr < patch; ++rr) {
          for (int cc = 0; cc < patch; ++cc, ++f) {
            out(token, f) =
                static_cast<Real>(scene.at(c, pr * patch + rr, pc * patch + cc));
          }
        }
      }
    }
  }
  return out;
}

template <typename Real>
RowMat<Real> descriptor_matrix(const std::vector<traj::Trajectory>& trajectories,
                               int prefix) {
  if (prefix < 1 || prefix > static_cast<int>(trajectories.size())) {
    throw ModelError("descriptor_matrix: prefix outside the vocabulary");
  }
  RowMat<Real> out(prefix, kDescriptorDim);
  for (int i = 0; i < prefix; ++i) {
    const auto desc = tokenize_trajectory(trajectories[static_cast<std::size_t>(i)]);
    for (int j = 0; j < kDescriptorDim; ++j) {
      out(i, j) = static_cast<Real>(desc[static_cast<std::size_t>(j)]);
    }
  }
  return out;
}

template <typename Real>
ForwardResult<Real> forward(const ScorerModelT<Real>& m, const RasterScene& scene,
                            const RowMat<Real>& descriptors, Tape<Real>* tape) {
  using Mat = RowMat<Real>;
  const ModelConfig& cfg = m.config;
  const int n = static_cast<int>(descriptors.rows());
  if (n < 1) throw ModelError("forward requires at least one trajectory");
  if (descriptors.cols() != kDescriptorDim) {
    throw ModelError("descriptor width mismatch");
  }

  Tape<Real> local;
  Tape<Real>& tp = tape != nullptr ? *tape : local;
  tp.n = n;
  tp.blocks.clear();
  tp.blocks.resize(static_cast<std::size_t>(cfg.blocks));

  tp.patches = extract_patches<Real>(scene, cfg);
  tp.descriptors = descriptors;

  tp.scene = tp.patches * m.patch_w + m.pos;
  tp.scene.rowwise() += m.patch_b.row(0);
  detail::check_finite(tp.scene, "patch embedding");

  // The scene normalization statistics are shared by every block (the scene
  // tokens are not updated); only the per-block gain/bias differ.
  {
    Mat g1 = Mat::Ones(1, cfg.d_model), b0 = Mat::Zero(1, cfg.d_model);
    detail::layer_norm(tp.scene, g1, b0, tp.scene_hat, tp.scene_rstd);
  }

  Mat x = descriptors * m.traj_w;
  x.rowwise() += m.traj_b.row(0);
  detail::check_finite(x, "trajectory embedding");

  const int heads = cfg.heads, dh = cfg.head_dim();
  const Real inv_sqrt_dh = Real(1) / std::sqrt(static_cast<Real>(dh));

  for (int b = 0; b < cfg.blocks; ++b) {
    auto& bt = tp.blocks[static_cast<std::size_t>(b)];
    const auto& blk = m.blocks[static_cast<std::size_t>(b)];
    bt.x_in = x;

    const Mat xq = detail::layer_norm(bt.x_in, blk.lnq_g, blk.lnq_b, bt.x_hat,
                                      bt.x_rstd);
    bt.sk = tp.scene_hat;
    for (Eigen::Index i = 0; i < bt.sk.rows(); ++i) {
      bt.sk.row(i) = tp.scene_hat.row(i).cwiseProduct(blk.lnkv_g.row(0)) +
                     blk.lnkv_b.row(0);
    }

    bt.q = xq * blk.wq;
    bt.q.rowwise() += blk.bq.row(0);
    bt.k = bt.sk * blk.wk;
    bt.k.rowwise() += blk.bk.row(0);
    bt.v = bt.sk * blk.wv;
    bt.v.rowwise() += blk.bv.row(0);

    bt.attn.resize(static_cast<std::size_t>(heads));
    bt.head_concat.resize(n, cfg.d_model);
    for (int h = 0; h < heads; ++h) {
      const auto qh = bt.q.middleCols(h * dh, dh);
      const auto kh = bt.k.middleCols(h * dh, dh);
      const auto vh = bt.v.middleCols(h * dh, dh);
      Mat z = (qh * kh.transpose()) * inv_sqrt_dh;
      bt.attn[static_cast<std::size_t>(h)] = detail::softmax_rows(z);
      bt.head_concat.middleCols(h * dh, dh) =
          bt.attn[static_cast<std::size_t>(h)] * vh;
    }

    Mat attn_out = bt.head_concat * blk.wo;
    attn_out.rowwise() += blk.bo.row(0);
    bt.x_mid = bt.x_in + attn_out;

    const Mat xn = detail::layer_norm(bt.x_mid, blk.ln2_g, blk.ln2_b, bt.mid_hat,
                                      bt.mid_rstd);
    bt.z1 = xn * blk.ff1;
    bt.z1.rowwise() += blk.ff1_b.row(0);
    bt.relu = bt.z1.cwiseMax(Real(0));
    Mat f = bt.relu * blk.ff2;
    f.rowwise() += blk.ff2_b.row(0);
    x = bt.x_mid + f;
    if (!x.allFinite()) {
      throw ModelError("non-finite activations in decoder block " +
                       std::to_string(b));
    }
  }
  tp.x_out = x;

  ForwardResult<Real> out;
  out.policy_logits = (x * m.policy_w.transpose()).col(0);
  out.policy_logits.array() += m.policy_b(0, 0);
  out.score_logits = x * m.score_w.transpose();
  out.score_logits.rowwise() += m.score_b.row(0);
  if (!out.policy_logits.allFinite()) {
    throw ModelError("non-finite activations in policy head");
  }
  detail::check_finite(out.score_logits, "scoring heads");
  return out;
}

template <typename Real>
void backward(const ScorerModelT<Real>& m, const Tape<Real>& tp,
              const Eigen::Matrix<Real, Eigen::Dynamic, 1>& d_policy_logits,
              const RowMat<Real>& d_score_logits, ScorerModelT<Real>& grads) {
  using Mat = RowMat<Real>;
  const ModelConfig& cfg = m.config;
  const int n = tp.n;
  if (d_policy_logits.size() != n) {
    throw ModelError("backward: policy seed shape mismatch (" +
                     std::to_string(d_policy_logits.size()) + " vs " +
                     std::to_string(n) + ")");
  }
  if (d_score_logits.rows() != n || d_score_logits.cols() != cfg.metric_heads) {
    throw ModelError("backward: score seed shape mismatch (" +
                     std::to_string(d_score_logits.rows()) + "x" +
                     std::to_string(d_score_logits.cols()) + " vs " +
                     std::to_string(n) + "x" + std::to_string(cfg.metric_heads) +
                     ")");
  }

  const int heads = cfg.heads, dh = cfg.head_dim();
  const Real inv_sqrt_dh = Real(1) / std::sqrt(static_cast<Real>(dh));

  // Heads.
  grads.policy_w.row(0) += d_policy_logits.transpose() * tp.x_out;
  grads.policy_b(0, 0) += d_policy_logits.sum();
  grads.score_w += d_score_logits.transpose() * tp.x_out;
  grads.score_b.row(0) += d_score_logits.colwise().sum();

  Mat dx = d_policy_logits * m.policy_w;  // (n x 1) * (1 x d)
  dx += d_score_logits * m.score_w;

  Mat d_scene_hat = Mat::Zero(cfg.scene_tokens(), cfg.d_model);

  for (int b = cfg.blocks - 1; b >= 0; --b) {
    const auto& bt = tp.blocks[static_cast<std::size_t>(b)];
    const auto& blk = m.blocks[static_cast<std::size_t>(b)];
    auto& gblk = grads.blocks[static_cast<std::size_t>(b)];

    // Feed-forward sub-layer: x = x_mid + relu(LN2(x_mid) ff1 + b1) ff2 + b2.
    Mat d_mid = dx;  // residual branch
    gblk.ff2 += bt.relu.transpose() * dx;
    gblk.ff2_b.row(0) += dx.colwise().sum();
    Mat dz1 = dx * blk.ff2.transpose();
    dz1 = ((bt.z1.array() > Real(0)).template cast<Real>() * dz1.array()).matrix();
    gblk.ff1 += (bt.mid_hat.cwiseProduct(blk.ln2_g.row(0).replicate(n, 1)) +
                 blk.ln2_b.row(0).replicate(n, 1))
                    .transpose() *
                dz1;
    gblk.ff1_b.row(0) += dz1.colwise().sum();
    Mat d_xn = dz1 * blk.ff1.transpose();
    detail::layer_norm_backward(d_xn, bt.mid_hat, bt.mid_rstd, blk.ln2_g, d_mid,
                                gblk.ln2_g, gblk.ln2_b);

    // Attention sub-layer: x_mid = x_in + (heads) wo + bo.
    Mat d_attn_out = d_mid;
    Mat d_x_in = d_mid;  // residual branch
    gblk.wo += bt.head_concat.transpose() * d_attn_out;
    gblk.bo.row(0) += d_attn_out.colwise().sum();
    Mat d_heads = d_attn_out * blk.wo.transpose();

    Mat dq = Mat::Zero(n, cfg.d_model);
    Mat dk = Mat::Zero(cfg.scene_tokens(), cfg.d_model);
    Mat dv = Mat::Zero(cfg.scene_tokens(), cfg.d_model);
    for (int h = 0; h < heads; ++h) {
      const auto& a = bt.attn[static_cast<std::size_t>(h)];
      const auto vh = bt.v.middleCols(h * dh, dh);
      const auto qh = bt.q.middleCols(h * dh, dh);
      const auto kh = bt.k.middleCols(h * dh, dh);
      const Mat d_oh = d_heads.middleCols(h * dh, dh);
      Mat da = d_oh * vh.transpose();
      dv.middleCols(h * dh, dh) = a.transpose() * d_oh;
      // Softmax backward per row.
      Mat dz(a.rows(), a.cols());
      for (Eigen::Index i = 0; i < a.rows(); ++i) {
        const Real dot = da.row(i).cwiseProduct(a.row(i)).sum();
        dz.row(i) = (a.row(i).array() * (da.row(i).array() - dot)).matrix();
      }
      dq.middleCols(h * dh, dh) = (dz * kh) * inv_sqrt_dh;
      dk.middleCols(h * dh, dh) = (dz.transpose() * qh) * inv_sqrt_dh;
    }

    // Projections.
    const Mat xq = bt.x_hat.cwiseProduct(blk.lnq_g.row(0).replicate(n, 1)) +
                   blk.lnq_b.row(0).replicate(n, 1);
    gblk.wq += xq.transpose() * dq;
    gblk.bq.row(0) += dq.colwise().sum();
    gblk.wk += bt.sk.transpose() * dk;
    gblk.bk.row(0) += dk.colwise().sum();
    gblk.wv += bt.sk.transpose() * dv;
    gblk.bv.row(0) += dv.colwise().sum();

    Mat d_xq = dq * blk.wq.transpose();
    detail::layer_norm_backward(d_xq, bt.x_hat, bt.x_rstd, blk.lnq_g, d_x_in,
                                gblk.lnq_g, gblk.lnq_b);

    // Scene-side pre-norm: sk = scene_hat * g + b.
    Mat d_sk = dk * blk.wk.transpose() + dv * blk.wv.transpose();
    gblk.lnkv_g.row(0) += d_sk.cwiseProduct(tp.scene_hat).colwise().sum();
    gblk.lnkv_b.row(0) += d_sk.colwise().sum();
    for (Eigen::Index i = 0; i < d_sk.rows(); ++i) {
      d_scene_hat.row(i) += d_sk.row(i).cwiseProduct(blk.lnkv_g.row(0));
    }

    dx = d_x_in;
  }

  // Trajectory embedding.
  grads.traj_w += tp.descriptors.transpose() * dx;
  grads.traj_b.row(0) += dx.colwise().sum();

  // Scene normalization backward (plain LN, unit gain) then patch embedding.
  Mat d_scene = Mat::Zero(cfg.scene_tokens(), cfg.d_model);
  {
    Mat unit_g = Mat::Ones(1, cfg.d_model);
    Mat dg_sink = Mat::Zero(1, cfg.d_model), db_sink = Mat::Zero(1, cfg.d_model);
    detail::layer_norm_backward(d_scene_hat, tp.scene_hat, tp.scene_rstd, unit_g,
                                d_scene, dg_sink, db_sink);
  }
  grads.pos += d_scene;
  grads.patch_w += tp.patches.transpose() * d_scene;
  grads.patch_b.row(0) += d_scene.colwise().sum();
}

template <typename Real>
Eigen::VectorXd stable_softmax(
    const Eigen::Matrix<Real, Eigen::Dynamic, 1>& logits) {
  const Eigen::Index n = logits.size();
  Eigen::VectorXd out(n);
  double mx = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < n; ++i) {
    mx = std::max(mx, static_cast<double>(logits[i]));
  }
  long double sum = 0.0L;
  for (Eigen::Index i = 0; i < n; ++i) {
    out[i] = std::exp(static_cast<double>(logits[i]) - mx);
    sum += out[i];
  }
  const double inv = static_cast<double>(1.0L / sum);
  for (Eigen::Index i = 0; i < n; ++i) out[i] *= inv;
  return out;
}

}  // namespace epo::model
