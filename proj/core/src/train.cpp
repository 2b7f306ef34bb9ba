#include <cmath>
#include <cstdio>
#include <numeric>

#include "memtangle/errors.hpp"
#include "memtangle/model.hpp"
#include "memtangle/prng.hpp"

namespace memtangle {

namespace {

// He-normal: W_ij ~ N(0, 2/fan_in), biases zero. Row-major draw order so
// the stream layout is fixed.
LinearLayer init_layer(Pcg32& rng, std::size_t out, std::size_t in) {
  LinearLayer layer;
  layer.W.resize(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
  const double stddev = std::sqrt(2.0 / static_cast<double>(in));
  for (Eigen::Index i = 0; i < layer.W.rows(); ++i)
    for (Eigen::Index j = 0; j < layer.W.cols(); ++j)
      layer.W(i, j) = stddev * rng.next_gaussian();
  layer.b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(out));
  return layer;
}

Mlp init_mlp(Pcg32& rng, std::initializer_list<std::size_t> widths) {
  Mlp mlp;
  auto it = widths.begin();
  std::size_t prev = *it++;
  for (; it != widths.end(); ++it) {
    mlp.layers.push_back(init_layer(rng, *it, prev));
    prev = *it;
  }
  return mlp;
}

}  // namespace

StraightforwardModel init_straightforward(std::uint32_t d_f, std::uint32_t d_c,
                                          const TrainConfig& cfg) {
  cfg.validate();
  Pcg32 rng(cfg.seed, "init");
  StraightforwardModel model;
  for (auto& mlp : model.mlps) mlp = init_mlp(rng, {d_f, cfg.hidden, d_c});
  return model;
}

DisentangledModel init_disentangled(std::uint32_t d_f, std::uint32_t d_c,
                                    const TrainConfig& cfg) {
  cfg.validate();
  Pcg32 rng(cfg.seed, "init");
  DisentangledModel model;
  model.d_h = cfg.d_h;
  model.trunk = init_mlp(rng, {d_f, cfg.hidden, 2 * cfg.d_h});
  model.head0 = init_mlp(rng, {cfg.d_h, static_cast<std::size_t>(d_c)});
  model.head1 = init_mlp(rng, {cfg.d_h, static_cast<std::size_t>(d_c)});
  model.head2 = init_mlp(rng, {cfg.d_h, static_cast<std::size_t>(d_c)});
  return model;
}

namespace {

void check_windows(const std::vector<WindowSample>& train,
                   const TrainConfig& cfg) {
  if (train.empty()) throw DataError("train: no window samples");
  if (cfg.batch_size > train.size())
    throw ConfigError("train: batch_size " + std::to_string(cfg.batch_size) +
                      " exceeds training-set size " +
                      std::to_string(train.size()));
  const auto d_f = train.front().fmri_t.size();
  const auto d_c = train.front().target_embeddings[0].size();
  if (d_f == 0 || d_c == 0) throw DataError("train: empty signal or embedding");
  for (const auto& w : train) {
    if (w.fmri_t.size() != d_f || w.fmri_prev.size() != d_f)
      throw DataError("train: inconsistent signal width");
    for (const auto& e : w.target_embeddings)
      if (e.size() != d_c) throw DataError("train: inconsistent embedding width");
  }
}

std::vector<const WindowSample*> pointers(const std::vector<WindowSample>& ws) {
  std::vector<const WindowSample*> ptrs(ws.size());
  for (std::size_t i = 0; i < ws.size(); ++i) ptrs[i] = &ws[i];
  return ptrs;
}

template <typename Model, typename Grads>
TrainResult train_impl(Model model, Grads grads,
                       const std::vector<WindowSample>& train,
                       const TrainConfig& cfg,
                       const std::vector<WindowSample>* val,
                       LossReport (*loss_fn)(const Model&,
                                             std::span<const WindowSample* const>,
                                             const TrainConfig&, Grads*)) {
  auto train_ptrs = pointers(train);
  std::vector<const WindowSample*> val_ptrs;
  if (val) {
    if (val->empty()) throw DataError("train: empty validation set");
    val_ptrs = pointers(*val);
  }

  auto params = param_views(model);
  auto gviews = param_views(grads);
  AdamWState state;
  Pcg32 shuffle_rng(cfg.seed, "shuffle");
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::vector<TraceRow> trace;
  std::vector<const WindowSample*> batch(cfg.batch_size);
  std::size_t step = 0;
  const std::size_t n_batches = train.size() / cfg.batch_size;  // drop partial
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double mse_sum = 0.0, info_sum = 0.0, total_sum = 0.0;
    for (std::size_t bi = 0; bi < n_batches; ++bi) {
      for (std::size_t j = 0; j < cfg.batch_size; ++j)
        batch[j] = train_ptrs[order[bi * cfg.batch_size + j]];
      for (auto& g : gviews)
        Eigen::Map<Eigen::ArrayXd>(g.data, static_cast<Eigen::Index>(g.size))
            .setZero();
      LossReport report = loss_fn(model, batch, cfg, &grads);
      adamw_step(params, gviews, state, cfg, ++step);
      mse_sum += report.mse;
      info_sum += report.infonce;
      total_sum += report.total;
    }
    const double inv = 1.0 / static_cast<double>(n_batches);
    trace.push_back({epoch, "train", mse_sum * inv, info_sum * inv,
                     total_sum * inv});
    if (val) {
      LossReport report = loss_fn(model, val_ptrs, cfg, nullptr);
      trace.push_back({epoch, "val", report.mse, report.infonce, report.total});
    }
  }
  return {std::move(model), std::move(trace)};
}

}  // namespace

TrainResult train_straightforward(const std::vector<WindowSample>& train,
                                  const TrainConfig& cfg,
                                  const std::vector<WindowSample>* val) {
  cfg.validate();
  check_windows(train, cfg);
  auto d_f = static_cast<std::uint32_t>(train.front().fmri_t.size());
  auto d_c = static_cast<std::uint32_t>(train.front().target_embeddings[0].size());
  StraightforwardModel model = init_straightforward(d_f, d_c, cfg);
  SfGrads grads{{zero_grads(model.mlps[0]), zero_grads(model.mlps[1]),
                 zero_grads(model.mlps[2])}};
  return train_impl(std::move(model), std::move(grads), train, cfg, val,
                    &sf_batch_loss);
}

TrainResult train_disentangled(const std::vector<WindowSample>& train,
                               const TrainConfig& cfg,
                               const std::vector<WindowSample>* val) {
  cfg.validate();
  check_windows(train, cfg);
  auto d_f = static_cast<std::uint32_t>(train.front().fmri_t.size());
  auto d_c = static_cast<std::uint32_t>(train.front().target_embeddings[0].size());
  DisentangledModel model = init_disentangled(d_f, d_c, cfg);
  DisGrads grads{zero_grads(model.trunk), zero_grads(model.head0),
                 zero_grads(model.head1), zero_grads(model.head2)};
  return train_impl(std::move(model), std::move(grads), train, cfg, val,
                    &dis_batch_loss);
}

namespace {
Eigen::VectorXd to_vec(const std::vector<float>& v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = v[i];
  return out;
}
}  // namespace

std::array<Eigen::VectorXd, 3> predict_offsets(const StraightforwardModel& m,
                                               const std::vector<float>& fmri_t) {
  Eigen::VectorXd x = to_vec(fmri_t);
  return {mlp_forward(m.mlps[0], x), mlp_forward(m.mlps[1], x),
          mlp_forward(m.mlps[2], x)};
}

std::array<Eigen::VectorXd, 3> predict_offsets(const DisentangledModel& m,
                                               const std::vector<float>& fmri_t) {
  Eigen::VectorXd h = mlp_forward(m.trunk, to_vec(fmri_t));
  const auto d_h = static_cast<Eigen::Index>(m.d_h);
  Eigen::VectorXd before = h.head(d_h);
  Eigen::VectorXd now = h.tail(d_h);
  return {mlp_forward(m.head0, now), mlp_forward(m.head1, before),
          mlp_forward(m.head2, before)};
}

std::array<double, 3> evaluate_offset_mse(
    const std::variant<StraightforwardModel, DisentangledModel>& model,
    const std::vector<WindowSample>& windows) {
  if (windows.empty()) throw DataError("evaluate_offset_mse: no windows");
  std::array<double, 3> sums = {0.0, 0.0, 0.0};
  for (const auto& w : windows) {
    auto preds = std::visit(
        [&](const auto& m) { return predict_offsets(m, w.fmri_t); }, model);
    for (std::size_t i = 0; i < 3; ++i) {
      Eigen::VectorXd target = to_vec(w.target_embeddings[i]);
      if (target.size() != preds[i].size())
        throw DataError("evaluate_offset_mse: embedding width mismatch");
      sums[i] += (preds[i] - target).squaredNorm() /
                 static_cast<double>(target.size());
    }
  }
  for (auto& s : sums) s /= static_cast<double>(windows.size());
  return sums;
}

std::string trace_csv(const std::vector<TraceRow>& trace) {
  std::string out = "epoch,split,mse,infonce,total\n";
  char buf[160];
  for (const auto& row : trace) {
    std::snprintf(buf, sizeof(buf), "%zu,%s,%.9g,%.9g,%.9g\n", row.epoch,
                  row.split.c_str(), row.mse, row.infonce, row.total);
    out += buf;
  }
  return out;
}

}  // namespace memtangle
