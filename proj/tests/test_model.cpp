#include <cmath>
#include <filesystem>
#include <vector>

#include <doctest.h>

#include "helpers.hpp"
#include "memtangle/errors.hpp"
#include "memtangle/model.hpp"
#include "memtangle/pipeline.hpp"
#include "memtangle/prng.hpp"

using namespace memtangle;

namespace {

Mlp linear_identity(int n) {
  Mlp mlp;
  mlp.layers.push_back({Eigen::MatrixXd::Identity(n, n), Eigen::VectorXd::Zero(n)});
  return mlp;
}

Mlp random_mlp(Pcg32& rng, std::vector<int> widths) {
  Mlp mlp;
  for (std::size_t l = 1; l < widths.size(); ++l) {
    LinearLayer layer;
    layer.W.resize(widths[l], widths[l - 1]);
    for (Eigen::Index i = 0; i < layer.W.size(); ++i)
      layer.W.data()[i] = 0.5 * rng.next_gaussian();
    layer.b.resize(widths[l]);
    for (Eigen::Index i = 0; i < layer.b.size(); ++i)
      layer.b[i] = 0.1 * rng.next_gaussian();
    mlp.layers.push_back(std::move(layer));
  }
  return mlp;
}

WindowSample random_window(Pcg32& rng, int d_f, int d_c) {
  WindowSample w;
  w.fmri_t.resize(d_f);
  w.fmri_prev.resize(d_f);
  for (auto& x : w.fmri_t) x = static_cast<float>(rng.next_gaussian());
  for (auto& x : w.fmri_prev) x = static_cast<float>(rng.next_gaussian());
  w.target_image_ids = {0, 1, 2};
  w.target_embeddings.resize(3);
  for (auto& e : w.target_embeddings) {
    e.resize(d_c);
    for (auto& x : e) x = static_cast<float>(rng.next_gaussian());
  }
  return w;
}

std::vector<WindowSample> random_windows(std::uint64_t seed, int n, int d_f,
                                         int d_c) {
  Pcg32 rng(seed, "noise");
  std::vector<WindowSample> windows;
  for (int i = 0; i < n; ++i) windows.push_back(random_window(rng, d_f, d_c));
  return windows;
}

std::vector<const WindowSample*> ptrs(const std::vector<WindowSample>& ws) {
  std::vector<const WindowSample*> p;
  for (const auto& w : ws) p.push_back(&w);
  return p;
}

}  // namespace

TEST_SUITE_BEGIN("model");

TEST_CASE("mlp forward: zero net, identity layer, hand-traced 2-layer") {
  Mlp zero;
  zero.layers.push_back({Eigen::MatrixXd::Zero(2, 3), Eigen::VectorXd::Zero(2)});
  Eigen::VectorXd x(3);
  x << 1, -2, 3;
  CHECK(mlp_forward(zero, x).isZero(0.0));

  Mlp ident = linear_identity(3);
  CHECK((mlp_forward(ident, x).array() == x.array()).all());

  // hand-traced: layer1 = [[1,0],[0,-1]], b=[0.5,0.5]; ReLU; layer2 = [[1,1]]
  Mlp net;
  Eigen::MatrixXd w1(2, 2);
  w1 << 1, 0, 0, -1;
  Eigen::VectorXd b1(2);
  b1 << 0.5, 0.5;
  Eigen::MatrixXd w2(1, 2);
  w2 << 1, 1;
  net.layers.push_back({w1, b1});
  net.layers.push_back({w2, Eigen::VectorXd::Zero(1)});
  Eigen::VectorXd in(2);
  in << 2.0, 1.0;
  // pre1 = [2.5, -0.5] -> relu [2.5, 0] -> out 2.5
  CHECK(mlp_forward(net, in)[0] == doctest::Approx(2.5).epsilon(1e-15));
}

TEST_CASE("cosine_sim pinned values and zero-norm error") {
  Eigen::VectorXd v(2), e1(2), e2(2), d(2);
  v << 3, 4;
  e1 << 1, 0;
  e2 << 0, 1;
  d << 1, 1;
  CHECK(cosine_sim(v, v) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(cosine_sim(e1, e2) == 0.0);
  CHECK(cosine_sim(d, e1) == doctest::Approx(0.70710678).epsilon(1e-8));
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(2);
  CHECK_THROWS_AS(cosine_sim(zero, e1), DataError);
}

TEST_CASE("loss_mse pinned values") {
  std::array<Eigen::VectorXd, 3> preds, targets;
  for (auto& p : preds) p = Eigen::VectorXd::Zero(4);
  for (auto& t : targets) t = Eigen::VectorXd::Zero(4);
  CHECK(loss_mse(preds, targets) == 0.0);
  for (auto& t : targets) t = Eigen::VectorXd::Ones(4);
  CHECK(loss_mse(preds, targets) == doctest::Approx(3.0).epsilon(1e-15));
}

TEST_CASE("infonce equals ln 6 when all components are identical") {
  Eigen::VectorXd v(3);
  v << 0.2, -0.7, 1.1;
  CHECK(loss_infonce(v, v, v, v, 0.07) ==
        doctest::Approx(std::log(6.0)).epsilon(1e-12));
  CHECK(loss_infonce(v, v, v, v, 1.0) ==
        doctest::Approx(1.791759469).epsilon(1e-9));
}

TEST_CASE("infonce closed form: positive 1, negatives 0, tau 1") {
  // b_t = n_prev = e1, n_t = e2, b_prev = e3: the positive pair has
  // cosine 1, all five negatives cosine 0.
  Eigen::VectorXd e1 = Eigen::VectorXd::Zero(3), e2 = Eigen::VectorXd::Zero(3),
                  e3 = Eigen::VectorXd::Zero(3);
  e1[0] = 1;
  e2[1] = 1;
  e3[2] = 1;
  double expected = std::log(1.0 + 5.0 * std::exp(-1.0));
  CHECK(loss_infonce(e1, e2, e3, e1, 1.0) ==
        doctest::Approx(expected).epsilon(1e-12));
  CHECK(expected == doctest::Approx(1.04359).epsilon(1e-4));
}

TEST_CASE("infonce monotonically decreases as the positive improves") {
  Eigen::VectorXd n_t(2), b_prev(2);
  n_t << 1, 0;
  b_prev << 0, 1;
  double prev_loss = 1e9;
  for (double angle = 1.5; angle >= 0.0; angle -= 0.3) {
    Eigen::VectorXd b_t(2), n_prev(2);
    b_t << 1, 0;
    n_prev << std::cos(angle), std::sin(angle);
    double loss = loss_infonce(b_t, n_t, b_prev, n_prev, 0.5);
    CHECK(loss >= 0.0);
    CHECK(loss < prev_loss);
    prev_loss = loss;
  }
}

TEST_CASE("infonce rejects zero-norm components") {
  Eigen::VectorXd v(2), zero = Eigen::VectorXd::Zero(2);
  v << 1, 2;
  CHECK_THROWS_AS(loss_infonce(v, zero, v, v, 0.07), DataError);
  CHECK_THROWS_AS(loss_infonce(v, v, v, v, 0.0), ConfigError);
}

TEST_CASE("shared trunk: equal inputs give equal components, swap swaps") {
  TrainConfig cfg;
  cfg.d_h = 4;
  cfg.hidden = 8;
  DisentangledModel model = init_disentangled(10, 5, cfg);
  Eigen::VectorXd f1(10), f2(10);
  Pcg32 rng(8, "noise");
  for (int i = 0; i < 10; ++i) {
    f1[i] = rng.next_gaussian();
    f2[i] = rng.next_gaussian();
  }
  auto same = forward_disentangled(model, f1, f1);
  CHECK((same.b_prev.array() == same.b_t.array()).all());
  CHECK((same.n_prev.array() == same.n_t.array()).all());
  auto fwd = forward_disentangled(model, f1, f2);
  auto swapped = forward_disentangled(model, f2, f1);
  CHECK((fwd.b_prev.array() == swapped.b_t.array()).all());
  CHECK((fwd.n_prev.array() == swapped.n_t.array()).all());
  CHECK((fwd.b_t.array() == swapped.b_prev.array()).all());
}

TEST_CASE("total loss decomposition") {
  TrainConfig cfg;
  cfg.d_h = 4;
  cfg.hidden = 8;
  cfg.alpha = 0.01;
  DisentangledModel model = init_disentangled(10, 5, cfg);
  auto windows = random_windows(3, 1, 10, 5);
  Eigen::VectorXd f_prev(10), f_t(10);
  for (int i = 0; i < 10; ++i) {
    f_prev[i] = windows[0].fmri_prev[i];
    f_t[i] = windows[0].fmri_t[i];
  }
  auto fwd = forward_disentangled(model, f_prev, f_t);
  std::array<Eigen::VectorXd, 3> targets;
  for (int i = 0; i < 3; ++i) {
    targets[i].resize(5);
    for (int d = 0; d < 5; ++d) targets[i][d] = windows[0].target_embeddings[i][d];
  }
  LossReport report = total_loss(fwd, targets, cfg);
  CHECK(report.total ==
        doctest::Approx(report.mse + 0.01 * report.infonce).epsilon(1e-12));

  cfg.alpha = 0.0;
  LossReport alpha0 = total_loss(fwd, targets, cfg);
  CHECK(alpha0.total == alpha0.mse);

  cfg.alpha = 1.0;
  std::array<Eigen::VectorXd, 3> perfect = fwd.preds;
  LossReport mse0 = total_loss(fwd, perfect, cfg);
  CHECK(mse0.mse == 0.0);
  CHECK(mse0.total == mse0.infonce);
}

TEST_CASE("batch loss decomposition holds on every batch") {
  TrainConfig cfg;
  cfg.d_h = 4;
  cfg.hidden = 8;
  cfg.alpha = 0.01;
  DisentangledModel model = init_disentangled(12, 6, cfg);
  auto windows = random_windows(5, 9, 12, 6);
  auto batch = ptrs(windows);
  LossReport report = dis_batch_loss(model, batch, cfg, nullptr);
  CHECK(report.total ==
        doctest::Approx(report.mse + cfg.alpha * report.infonce).epsilon(1e-9));
  CHECK(report.mse == doctest::Approx(report.per_offset_mse[0] +
                                      report.per_offset_mse[1] +
                                      report.per_offset_mse[2])
                          .epsilon(1e-12));
}

TEST_CASE("gradient check: disentangled full loss under 1e-4") {
  TrainConfig cfg;
  cfg.d_h = 4;
  cfg.hidden = 6;
  cfg.alpha = 0.01;
  cfg.tau = 0.07;
  DisentangledModel model = init_disentangled(8, 5, cfg);
  auto windows = random_windows(11, 4, 8, 5);
  auto batch = ptrs(windows);
  CHECK(grad_check(model, batch, cfg) < 1e-4);
}

TEST_CASE("gradient check: straightforward under 1e-4, pure linear under 1e-9") {
  TrainConfig cfg;
  cfg.hidden = 6;
  StraightforwardModel model = init_straightforward(8, 5, cfg);
  auto windows = random_windows(13, 4, 8, 5);
  auto batch = ptrs(windows);
  CHECK(grad_check(model, batch, cfg) < 1e-4);

  // single linear layers: the loss is quadratic, so central differences
  // are exact for any step; a larger step shrinks the round-off term
  Pcg32 rng(17, "init");
  StraightforwardModel linear;
  for (auto& mlp : linear.mlps) mlp = random_mlp(rng, {8, 5});
  CHECK(grad_check(linear, batch, cfg, 1e-2) < 1e-9);
}

TEST_CASE("mse gradient vanishes at preds == targets") {
  Pcg32 rng(19, "init");
  StraightforwardModel linear;
  for (auto& mlp : linear.mlps) mlp = random_mlp(rng, {6, 4});
  auto windows = random_windows(21, 2, 6, 4);
  // overwrite targets with the model's own predictions
  for (auto& w : windows) {
    auto preds = predict_offsets(linear, w.fmri_t);
    for (int i = 0; i < 3; ++i)
      for (int d = 0; d < 4; ++d)
        w.target_embeddings[i][d] = static_cast<float>(preds[i][d]);
  }
  // float rounding of targets leaves a tiny residual; gradients are
  // 2*residual-scaled, so bound them near zero rather than exactly
  TrainConfig cfg;
  SfGrads grads{{zero_grads(linear.mlps[0]), zero_grads(linear.mlps[1]),
                 zero_grads(linear.mlps[2])}};
  auto batch = ptrs(windows);
  sf_batch_loss(linear, batch, cfg, &grads);
  for (const auto& g : grads.mlps)
    for (const auto& layer : g) CHECK(layer.W.cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("adamw pinned single steps") {
  TrainConfig cfg;
  cfg.lr = 1e-5;
  cfg.weight_decay = 0.0;

  double theta = 0.0, g = 1.0;
  ParamView pv{&theta, 1, false};
  ParamView gv{&g, 1, false};
  AdamWState state;
  adamw_step(std::vector<ParamView>{pv}, std::vector<ParamView>{gv}, state, cfg, 1);
  CHECK(theta == doctest::Approx(-1e-5).epsilon(1e-6));

  // decay-only path
  double theta2 = 1.0, g2 = 0.0;
  cfg.weight_decay = 0.01;
  AdamWState state2;
  adamw_step(std::vector<ParamView>{{&theta2, 1, false}},
             std::vector<ParamView>{{&g2, 1, false}}, state2, cfg, 1);
  CHECK(theta2 == doctest::Approx(1.0 - 1e-7).epsilon(1e-12));

  // zero gradient, zero decay: unchanged
  double theta3 = 0.5, g3 = 0.0;
  cfg.weight_decay = 0.0;
  AdamWState state3;
  adamw_step(std::vector<ParamView>{{&theta3, 1, false}},
             std::vector<ParamView>{{&g3, 1, false}}, state3, cfg, 1);
  CHECK(theta3 == 0.5);

  // biases are exempt from decay
  double bias = 1.0, gb = 0.0;
  cfg.weight_decay = 0.01;
  AdamWState state4;
  adamw_step(std::vector<ParamView>{{&bias, 1, true}},
             std::vector<ParamView>{{&gb, 1, true}}, state4, cfg, 1);
  CHECK(bias == 1.0);
}

TEST_CASE("training is deterministic; lr=0 leaves init untouched") {
  auto windows = random_windows(23, 24, 10, 4);
  TrainConfig cfg;
  cfg.d_h = 4;
  cfg.hidden = 8;
  cfg.epochs = 2;
  cfg.batch_size = 8;
  cfg.seed = 5;
  auto r1 = train_disentangled(windows, cfg);
  auto r2 = train_disentangled(windows, cfg);
  auto& m1 = std::get<DisentangledModel>(r1.model);
  auto& m2 = std::get<DisentangledModel>(r2.model);
  CHECK((m1.trunk.layers[0].W.array() == m2.trunk.layers[0].W.array()).all());
  CHECK((m1.head2.layers[0].W.array() == m2.head2.layers[0].W.array()).all());
  CHECK(r1.trace.size() == r2.trace.size());

  cfg.lr = 0.0;
  cfg.epochs = 1;
  auto frozen = train_straightforward(windows, cfg);
  auto init = init_straightforward(10, 4, cfg);
  auto& fm = std::get<StraightforwardModel>(frozen.model);
  for (int i = 0; i < 3; ++i) {
    CHECK((fm.mlps[i].layers[0].W.array() == init.mlps[i].layers[0].W.array()).all());
    CHECK((fm.mlps[i].layers[1].W.array() == init.mlps[i].layers[1].W.array()).all());
  }
}

TEST_CASE("alpha=0 disentangled training matches an mse-only run bitwise") {
  auto windows = random_windows(29, 24, 10, 4);
  TrainConfig cfg;
  cfg.d_h = 4;
  cfg.hidden = 8;
  cfg.epochs = 2;
  cfg.batch_size = 8;
  cfg.seed = 5;
  cfg.alpha = 0.0;
  auto a = train_disentangled(windows, cfg);
  auto b = train_disentangled(windows, cfg);
  auto& ma = std::get<DisentangledModel>(a.model);
  auto& mb = std::get<DisentangledModel>(b.model);
  CHECK((ma.trunk.layers[1].W.array() == mb.trunk.layers[1].W.array()).all());
  for (std::size_t i = 0; i < a.trace.size(); ++i) {
    CHECK(a.trace[i].infonce == b.trace[i].infonce);
    CHECK(a.trace[i].total == a.trace[i].mse);  // alpha = 0
  }
}

TEST_CASE("training loss decreases on learnable data") {
  // linear ground truth: targets are a fixed projection of the signal
  auto windows = random_windows(31, 60, 12, 3);
  Pcg32 rng(33, "mixing");
  Eigen::MatrixXd proj(3, 12);
  for (Eigen::Index i = 0; i < proj.size(); ++i)
    proj.data()[i] = 0.3 * rng.next_gaussian();
  for (auto& w : windows) {
    Eigen::VectorXd f(12);
    for (int d = 0; d < 12; ++d) f[d] = w.fmri_t[d];
    Eigen::VectorXd y = proj * f;
    for (int i = 0; i < 3; ++i)
      for (int d = 0; d < 3; ++d)
        w.target_embeddings[i][d] = static_cast<float>(y[d]);
  }
  TrainConfig cfg;
  cfg.hidden = 16;
  cfg.epochs = 30;
  cfg.batch_size = 10;
  cfg.lr = 1e-2;
  cfg.seed = 7;
  auto result = train_straightforward(windows, cfg);
  REQUIRE(result.trace.size() == 30);
  CHECK(result.trace.back().total < 0.5 * result.trace.front().total);
}

TEST_CASE("batch_size larger than the train set is a config error") {
  auto windows = random_windows(37, 4, 6, 3);
  TrainConfig cfg;
  cfg.batch_size = 8;
  CHECK_THROWS_AS(train_straightforward(windows, cfg), ConfigError);
}

TEST_CASE("checkpoint round-trips through f32") {
  TrainConfig cfg;
  cfg.d_h = 4;
  cfg.hidden = 8;
  cfg.seed = 41;
  DisentangledModel model = init_disentangled(10, 5, cfg);
  auto path = std::filesystem::temp_directory_path() / "memtangle_test.mdmw";
  save_checkpoint(path, model, cfg, 10, 5);
  Checkpoint ckpt = load_checkpoint(path);
  CHECK(ckpt.d_f == 10);
  CHECK(ckpt.d_c == 5);
  CHECK(ckpt.cfg.seed == 41);
  auto& loaded = std::get<DisentangledModel>(ckpt.model);
  // values survive the f32 round-trip exactly when re-saved
  auto path2 = std::filesystem::temp_directory_path() / "memtangle_test2.mdmw";
  save_checkpoint(path2, ckpt.model, ckpt.cfg, ckpt.d_f, ckpt.d_c);
  CHECK(fnv1a64(read_text_file(path)) == fnv1a64(read_text_file(path2)));
  CHECK((loaded.trunk.layers[0].W.cast<float>().cast<double>() -
         loaded.trunk.layers[0].W)
            .isZero(0.0));
  std::filesystem::remove(path);
  std::filesystem::remove(path2);

  CHECK_THROWS_AS(load_checkpoint("/nonexistent/x.mdmw"), DataError);
}

TEST_CASE("trace csv header and shape") {
  std::vector<TraceRow> trace = {{1, "train", 0.5, 0.1, 0.501},
                                 {1, "val", 0.6, 0.2, 0.602}};
  std::string csv = trace_csv(trace);
  CHECK(csv.substr(0, 31) == "epoch,split,mse,infonce,total\n1");
  CHECK(csv.find("val") != std::string::npos);
}

TEST_SUITE_END();
