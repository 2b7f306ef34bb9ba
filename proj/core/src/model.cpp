#include "memtangle/model.hpp"

#include <cmath>

#include "memtangle/errors.hpp"

namespace memtangle {

void TrainConfig::validate() const {
  if (tau <= 0.0) throw ConfigError("TrainConfig: tau must be > 0");
  if (alpha < 0.0) throw ConfigError("TrainConfig: alpha must be >= 0");
  if (lr < 0.0) throw ConfigError("TrainConfig: lr must be >= 0");
  if (weight_decay < 0.0) throw ConfigError("TrainConfig: weight_decay must be >= 0");
  if (epochs == 0 || batch_size == 0)
    throw ConfigError("TrainConfig: epochs and batch_size must be positive");
  if (d_h == 0 || hidden == 0)
    throw ConfigError("TrainConfig: d_h and hidden must be positive");
}

Eigen::MatrixXd mlp_forward_batch(const Mlp& mlp, const Eigen::MatrixXd& X,
                                  MlpCache* cache) {
  if (mlp.layers.empty()) throw ConfigError("mlp_forward: empty network");
  if (static_cast<std::size_t>(X.cols()) != mlp.input_width())
    throw DataError("mlp_forward: input width " + std::to_string(X.cols()) +
                    " != layer width " + std::to_string(mlp.input_width()));
  if (cache) {
    cache->inputs.clear();
    cache->inputs.reserve(mlp.layers.size());
  }
  Eigen::MatrixXd h = X;
  for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
    if (cache) cache->inputs.push_back(h);
    const LinearLayer& layer = mlp.layers[l];
    Eigen::MatrixXd z =
        (h * layer.W.transpose()).rowwise() + layer.b.transpose();
    if (l + 1 < mlp.layers.size()) z = z.cwiseMax(0.0);  // ReLU on hidden
    h = std::move(z);
  }
  if (cache) cache->output = h;
  return h;
}

Eigen::VectorXd mlp_forward(const Mlp& mlp, const Eigen::VectorXd& x) {
  return mlp_forward_batch(mlp, x.transpose()).row(0).transpose();
}

MlpGrads zero_grads(const Mlp& mlp) {
  MlpGrads grads;
  grads.reserve(mlp.layers.size());
  for (const auto& layer : mlp.layers)
    grads.push_back({Eigen::MatrixXd::Zero(layer.W.rows(), layer.W.cols()),
                     Eigen::VectorXd::Zero(layer.b.size())});
  return grads;
}

Eigen::MatrixXd mlp_backward(const Mlp& mlp, const MlpCache& cache,
                             const Eigen::MatrixXd& d_out, MlpGrads& grads) {
  if (grads.size() != mlp.layers.size())
    throw ConfigError("mlp_backward: gradient shape mismatch");
  Eigen::MatrixXd delta = d_out;
  for (std::size_t l = mlp.layers.size(); l-- > 0;) {
    const LinearLayer& layer = mlp.layers[l];
    const Eigen::MatrixXd& input = cache.inputs[l];
    if (l + 1 < mlp.layers.size()) {
      // ReLU mask from the layer's post-activation, which is the input
      // cached for the next layer.
      const Eigen::MatrixXd& act = cache.inputs[l + 1];
      delta = (act.array() > 0.0).cast<double>() * delta.array();
    }
    grads[l].W.noalias() += delta.transpose() * input;
    grads[l].b += delta.colwise().sum().transpose();
    if (l > 0) delta = (delta * layer.W).eval();
  }
  return delta * mlp.layers[0].W;
}

double cosine_sim(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) throw ConfigError("cosine_sim: length mismatch");
  double na = a.norm();
  double nb = b.norm();
  if (na == 0.0 || nb == 0.0)
    throw DataError("cosine_sim: zero-norm input");
  return a.dot(b) / (na * nb);
}

double loss_mse(const std::array<Eigen::VectorXd, 3>& preds,
                const std::array<Eigen::VectorXd, 3>& targets,
                std::array<double, 3>* per_offset) {
  double total = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    if (preds[i].size() != targets[i].size())
      throw DataError("loss_mse: length mismatch at offset " + std::to_string(i));
    double mse = (preds[i] - targets[i]).squaredNorm() /
                 static_cast<double>(preds[i].size());
    if (per_offset) (*per_offset)[i] = mse;
    total += mse;
  }
  return total;
}

namespace {

// Pair table: index 0 is the positive (b_t, n_prev); 1..5 are the
// negatives (n_t,b_t), (n_prev,b_prev), (n_t,n_prev), (b_t,b_prev),
// (n_t,b_prev).
constexpr int kPairA[6] = {0, 1, 3, 1, 0, 1};
constexpr int kPairB[6] = {3, 0, 2, 3, 2, 2};
// Component order: 0=b_t, 1=n_t, 2=b_prev, 3=n_prev.

double infonce_core(const Eigen::VectorXd* comp[4], double tau,
                    double grad_scale, Eigen::VectorXd* grad[4]) {
  double norms[4];
  for (int c = 0; c < 4; ++c) {
    norms[c] = comp[c]->norm();
    if (norms[c] == 0.0)
      throw DataError("loss_infonce: zero-norm component");
  }
  double s[6];
  for (int j = 0; j < 6; ++j) {
    const auto& a = *comp[kPairA[j]];
    const auto& b = *comp[kPairB[j]];
    s[j] = a.dot(b) / (norms[kPairA[j]] * norms[kPairB[j]]);
  }
  double zmax = s[0] / tau;
  for (int j = 1; j < 6; ++j) zmax = std::max(zmax, s[j] / tau);
  double denom = 0.0;
  double p[6];
  for (int j = 0; j < 6; ++j) {
    p[j] = std::exp(s[j] / tau - zmax);
    denom += p[j];
  }
  double loss = -(s[0] / tau - zmax) + std::log(denom);
  if (!std::isfinite(loss))
    throw NumericError("loss_infonce: non-finite loss");

  if (grad) {
    for (int j = 0; j < 6; ++j) {
      double ds = (p[j] / denom - (j == 0 ? 1.0 : 0.0)) / tau * grad_scale;
      if (ds == 0.0) continue;
      int ia = kPairA[j], ib = kPairB[j];
      const auto& a = *comp[ia];
      const auto& b = *comp[ib];
      double inv_ab = 1.0 / (norms[ia] * norms[ib]);
      // d cos(a,b) / da = b/(|a||b|) - cos * a/|a|^2
      grad[ia]->noalias() += ds * (b * inv_ab - s[j] / (norms[ia] * norms[ia]) * a);
      grad[ib]->noalias() += ds * (a * inv_ab - s[j] / (norms[ib] * norms[ib]) * b);
    }
  }
  return loss;
}

}  // namespace

double loss_infonce(const Eigen::VectorXd& b_t, const Eigen::VectorXd& n_t,
                    const Eigen::VectorXd& b_prev,
                    const Eigen::VectorXd& n_prev, double tau) {
  if (tau <= 0.0) throw ConfigError("loss_infonce: tau must be > 0");
  const Eigen::VectorXd* comp[4] = {&b_t, &n_t, &b_prev, &n_prev};
  return infonce_core(comp, tau, 0.0, nullptr);
}

DisentangledForward forward_disentangled(const DisentangledModel& model,
                                         const Eigen::VectorXd& f_prev,
                                         const Eigen::VectorXd& f_t) {
  const auto d_h = static_cast<Eigen::Index>(model.d_h);
  if (model.trunk.output_width() != model.d_h * 2)
    throw ConfigError("forward_disentangled: trunk output width must be 2*d_h");
  Eigen::VectorXd h_prev = mlp_forward(model.trunk, f_prev);
  Eigen::VectorXd h_t = mlp_forward(model.trunk, f_t);
  DisentangledForward fwd;
  fwd.b_prev = h_prev.head(d_h);
  fwd.n_prev = h_prev.tail(d_h);
  fwd.b_t = h_t.head(d_h);
  fwd.n_t = h_t.tail(d_h);
  fwd.preds[0] = mlp_forward(model.head0, fwd.n_t);
  fwd.preds[1] = mlp_forward(model.head1, fwd.b_t);
  fwd.preds[2] = mlp_forward(model.head2, fwd.b_t);
  return fwd;
}

LossReport total_loss(const DisentangledForward& fwd,
                      const std::array<Eigen::VectorXd, 3>& targets,
                      const TrainConfig& cfg) {
  cfg.validate();
  LossReport report;
  report.mse = loss_mse(fwd.preds, targets, &report.per_offset_mse);
  report.infonce = loss_infonce(fwd.b_t, fwd.n_t, fwd.b_prev, fwd.n_prev, cfg.tau);
  report.total = report.mse + cfg.alpha * report.infonce;
  return report;
}

namespace {

Eigen::MatrixXd gather_fmri(std::span<const WindowSample* const> batch,
                            bool prev) {
  const auto B = static_cast<Eigen::Index>(batch.size());
  const auto& first = prev ? batch[0]->fmri_prev : batch[0]->fmri_t;
  Eigen::MatrixXd X(B, static_cast<Eigen::Index>(first.size()));
  for (Eigen::Index i = 0; i < B; ++i) {
    const auto& v = prev ? batch[i]->fmri_prev : batch[i]->fmri_t;
    if (static_cast<Eigen::Index>(v.size()) != X.cols())
      throw DataError("batch: inconsistent fmri width");
    for (Eigen::Index d = 0; d < X.cols(); ++d) X(i, d) = v[d];
  }
  return X;
}

Eigen::MatrixXd gather_targets(std::span<const WindowSample* const> batch,
                               std::size_t offset) {
  const auto B = static_cast<Eigen::Index>(batch.size());
  const auto& first = batch[0]->target_embeddings.at(offset);
  Eigen::MatrixXd C(B, static_cast<Eigen::Index>(first.size()));
  for (Eigen::Index i = 0; i < B; ++i) {
    const auto& v = batch[i]->target_embeddings.at(offset);
    if (static_cast<Eigen::Index>(v.size()) != C.cols())
      throw DataError("batch: inconsistent embedding width");
    for (Eigen::Index d = 0; d < C.cols(); ++d) C(i, d) = v[d];
  }
  return C;
}

}  // namespace

LossReport dis_batch_loss(const DisentangledModel& model,
                          std::span<const WindowSample* const> batch,
                          const TrainConfig& cfg, DisGrads* grads) {
  if (batch.empty()) throw ConfigError("dis_batch_loss: empty batch");
  const auto B = static_cast<Eigen::Index>(batch.size());
  const auto d_h = static_cast<Eigen::Index>(model.d_h);
  const double inv_b = 1.0 / static_cast<double>(B);

  Eigen::MatrixXd f_prev = gather_fmri(batch, true);
  Eigen::MatrixXd f_t = gather_fmri(batch, false);

  MlpCache cache_prev, cache_t;
  Eigen::MatrixXd h_prev = mlp_forward_batch(model.trunk, f_prev, &cache_prev);
  Eigen::MatrixXd h_t = mlp_forward_batch(model.trunk, f_t, &cache_t);

  Eigen::MatrixXd comp_bt = h_t.leftCols(d_h);
  Eigen::MatrixXd comp_nt = h_t.rightCols(d_h);
  Eigen::MatrixXd comp_bp = h_prev.leftCols(d_h);
  Eigen::MatrixXd comp_np = h_prev.rightCols(d_h);

  MlpCache c0, c1, c2;
  Eigen::MatrixXd p0 = mlp_forward_batch(model.head0, comp_nt, &c0);
  Eigen::MatrixXd p1 = mlp_forward_batch(model.head1, comp_bt, &c1);
  Eigen::MatrixXd p2 = mlp_forward_batch(model.head2, comp_bt, &c2);

  std::array<Eigen::MatrixXd, 3> diffs = {p0 - gather_targets(batch, 0),
                                          p1 - gather_targets(batch, 1),
                                          p2 - gather_targets(batch, 2)};
  LossReport report;
  const double d_c = static_cast<double>(p0.cols());
  for (std::size_t i = 0; i < 3; ++i) {
    report.per_offset_mse[i] = diffs[i].squaredNorm() / d_c * inv_b;
    report.mse += report.per_offset_mse[i];
  }

  Eigen::MatrixXd d_bt, d_nt, d_bp, d_np;
  if (grads) {
    d_bt = Eigen::MatrixXd::Zero(B, d_h);
    d_nt = Eigen::MatrixXd::Zero(B, d_h);
    d_bp = Eigen::MatrixXd::Zero(B, d_h);
    d_np = Eigen::MatrixXd::Zero(B, d_h);
  }

  // InfoNCE is within-sample: one positive and five negatives per row.
  double infonce_sum = 0.0;
  Eigen::VectorXd bt, nt, bp, np, g_bt, g_nt, g_bp, g_np;
  const bool want_infonce_grad = grads && cfg.alpha > 0.0;
  for (Eigen::Index i = 0; i < B; ++i) {
    bt = comp_bt.row(i);
    nt = comp_nt.row(i);
    bp = comp_bp.row(i);
    np = comp_np.row(i);
    const Eigen::VectorXd* comp[4] = {&bt, &nt, &bp, &np};
    if (want_infonce_grad) {
      g_bt = Eigen::VectorXd::Zero(d_h);
      g_nt = Eigen::VectorXd::Zero(d_h);
      g_bp = Eigen::VectorXd::Zero(d_h);
      g_np = Eigen::VectorXd::Zero(d_h);
      Eigen::VectorXd* grad[4] = {&g_bt, &g_nt, &g_bp, &g_np};
      infonce_sum += infonce_core(comp, cfg.tau, cfg.alpha * inv_b, grad);
      d_bt.row(i) += g_bt.transpose();
      d_nt.row(i) += g_nt.transpose();
      d_bp.row(i) += g_bp.transpose();
      d_np.row(i) += g_np.transpose();
    } else {
      infonce_sum += infonce_core(comp, cfg.tau, 0.0, nullptr);
    }
  }
  report.infonce = infonce_sum * inv_b;
  report.total = report.mse + cfg.alpha * report.infonce;

  if (grads) {
    const double scale = 2.0 / d_c * inv_b;
    d_nt += mlp_backward(model.head0, c0, scale * diffs[0], grads->head0);
    d_bt += mlp_backward(model.head1, c1, scale * diffs[1], grads->head1);
    d_bt += mlp_backward(model.head2, c2, scale * diffs[2], grads->head2);

    Eigen::MatrixXd d_ht(B, 2 * d_h);
    d_ht << d_bt, d_nt;
    Eigen::MatrixXd d_hp(B, 2 * d_h);
    d_hp << d_bp, d_np;
    mlp_backward(model.trunk, cache_t, d_ht, grads->trunk);
    mlp_backward(model.trunk, cache_prev, d_hp, grads->trunk);
  }
  return report;
}

LossReport sf_batch_loss(const StraightforwardModel& model,
                         std::span<const WindowSample* const> batch,
                         const TrainConfig& cfg, SfGrads* grads) {
  if (batch.empty()) throw ConfigError("sf_batch_loss: empty batch");
  const auto B = static_cast<Eigen::Index>(batch.size());
  const double inv_b = 1.0 / static_cast<double>(B);
  Eigen::MatrixXd f_t = gather_fmri(batch, false);

  LossReport report;
  for (std::size_t i = 0; i < 3; ++i) {
    MlpCache cache;
    Eigen::MatrixXd p = mlp_forward_batch(model.mlps[i], f_t, &cache);
    Eigen::MatrixXd diff = p - gather_targets(batch, i);
    const double d_c = static_cast<double>(p.cols());
    report.per_offset_mse[i] = diff.squaredNorm() / d_c * inv_b;
    report.mse += report.per_offset_mse[i];
    if (grads)
      mlp_backward(model.mlps[i], cache, (2.0 / d_c * inv_b) * diff,
                   grads->mlps[i]);
  }
  report.infonce = 0.0;
  report.total = report.mse;
  (void)cfg;
  return report;
}

std::vector<ParamView> param_views(Mlp& mlp) {
  std::vector<ParamView> views;
  for (auto& layer : mlp.layers) {
    views.push_back({layer.W.data(), static_cast<std::size_t>(layer.W.size()), false});
    views.push_back({layer.b.data(), static_cast<std::size_t>(layer.b.size()), true});
  }
  return views;
}

namespace {
void append(std::vector<ParamView>& out, std::vector<ParamView> in) {
  out.insert(out.end(), in.begin(), in.end());
}
std::vector<ParamView> mlp_grad_views(MlpGrads& grads) {
  std::vector<ParamView> views;
  for (auto& layer : grads) {
    views.push_back({layer.W.data(), static_cast<std::size_t>(layer.W.size()), false});
    views.push_back({layer.b.data(), static_cast<std::size_t>(layer.b.size()), true});
  }
  return views;
}
}  // namespace

std::vector<ParamView> param_views(DisentangledModel& model) {
  std::vector<ParamView> views;
  append(views, param_views(model.trunk));
  append(views, param_views(model.head0));
  append(views, param_views(model.head1));
  append(views, param_views(model.head2));
  return views;
}

std::vector<ParamView> param_views(StraightforwardModel& model) {
  std::vector<ParamView> views;
  for (auto& mlp : model.mlps) append(views, param_views(mlp));
  return views;
}

std::vector<ParamView> param_views(DisGrads& grads) {
  std::vector<ParamView> views;
  append(views, mlp_grad_views(grads.trunk));
  append(views, mlp_grad_views(grads.head0));
  append(views, mlp_grad_views(grads.head1));
  append(views, mlp_grad_views(grads.head2));
  return views;
}

std::vector<ParamView> param_views(SfGrads& grads) {
  std::vector<ParamView> views;
  for (auto& mlp : grads.mlps) append(views, mlp_grad_views(mlp));
  return views;
}

void adamw_step(std::span<const ParamView> params,
                std::span<const ParamView> grads, AdamWState& state,
                const TrainConfig& cfg, std::size_t step_index) {
  if (params.size() != grads.size())
    throw ConfigError("adamw_step: parameter/gradient tensor count mismatch");
  if (step_index == 0) throw ConfigError("adamw_step: step_index must be >= 1");
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(Eigen::ArrayXd::Zero(p.size));
      state.v.emplace_back(Eigen::ArrayXd::Zero(p.size));
    }
  }
  if (state.m.size() != params.size())
    throw ConfigError("adamw_step: state tensor count mismatch");

  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step_index));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step_index));
  for (std::size_t t = 0; t < params.size(); ++t) {
    if (params[t].size != grads[t].size)
      throw ConfigError("adamw_step: tensor size mismatch");
    Eigen::Map<Eigen::ArrayXd> theta(params[t].data,
                                     static_cast<Eigen::Index>(params[t].size));
    Eigen::Map<const Eigen::ArrayXd> g(grads[t].data,
                                       static_cast<Eigen::Index>(grads[t].size));
    auto& m = state.m[t];
    auto& v = state.v[t];
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.square();
    Eigen::ArrayXd update = (m / bc1) / ((v / bc2).sqrt() + cfg.eps);
    if (!params[t].is_bias && cfg.weight_decay > 0.0)
      update += cfg.weight_decay * theta;
    theta -= cfg.lr * update;
    if (!theta.isFinite().all())
      throw NumericError("adamw_step: non-finite parameter after update (tensor " +
                         std::to_string(t) + ")");
  }
}

namespace {

template <typename Model, typename Grads>
double grad_check_impl(Model& model, Grads& grads,
                       std::span<const WindowSample* const> batch,
                       const TrainConfig& cfg, double h,
                       LossReport (*loss_fn)(const Model&,
                                             std::span<const WindowSample* const>,
                                             const TrainConfig&, Grads*)) {
  loss_fn(model, batch, cfg, &grads);
  auto params = param_views(model);
  auto gviews = param_views(grads);
  double max_rel = 0.0;
  for (std::size_t t = 0; t < params.size(); ++t) {
    for (std::size_t i = 0; i < params[t].size; ++i) {
      double saved = params[t].data[i];
      params[t].data[i] = saved + h;
      double lp = loss_fn(model, batch, cfg, nullptr).total;
      params[t].data[i] = saved - h;
      double lm = loss_fn(model, batch, cfg, nullptr).total;
      params[t].data[i] = saved;
      double g_num = (lp - lm) / (2.0 * h);
      double g_ana = gviews[t].data[i];
      double rel = std::abs(g_ana - g_num) /
                   std::max(1e-8, std::abs(g_ana) + std::abs(g_num));
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

}  // namespace

double grad_check(DisentangledModel& model,
                  std::span<const WindowSample* const> batch,
                  const TrainConfig& cfg, double h) {
  DisGrads grads{zero_grads(model.trunk), zero_grads(model.head0),
                 zero_grads(model.head1), zero_grads(model.head2)};
  return grad_check_impl(model, grads, batch, cfg, h, &dis_batch_loss);
}

double grad_check(StraightforwardModel& model,
                  std::span<const WindowSample* const> batch,
                  const TrainConfig& cfg, double h) {
  SfGrads grads{{zero_grads(model.mlps[0]), zero_grads(model.mlps[1]),
                 zero_grads(model.mlps[2])}};
  return grad_check_impl(model, grads, batch, cfg, h, &sf_batch_loss);
}

}  // namespace memtangle
