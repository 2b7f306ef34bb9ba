// Microbenchmarks for the numeric hot paths: ridge fits, MLP batch
// forward/backward, RDM construction, and CIDEr scoring.

#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "memtangle/analysis.hpp"
#include "memtangle/eval.hpp"
#include "memtangle/model.hpp"
#include "memtangle/prng.hpp"

using namespace memtangle;

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols,
                              Pcg32& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.next_gaussian();
  return m;
}

void bm_ridge_fit(benchmark::State& state) {
  const Eigen::Index n = state.range(0), p = state.range(1), q = 64;
  Pcg32 rng(1, "noise");
  Eigen::MatrixXd x = random_matrix(n, p, rng);
  Eigen::MatrixXd y = random_matrix(n, q, rng);
  for (auto _ : state) {
    RidgeModel model = ridge_fit(x, y, 1.0);
    benchmark::DoNotOptimize(model.W.data());
  }
}
BENCHMARK(bm_ridge_fit)->Args({512, 128})->Args({256, 1024})->Args({1024, 512});

void bm_mlp_forward_batch(benchmark::State& state) {
  const Eigen::Index batch = state.range(0);
  TrainConfig cfg;
  cfg.hidden = 512;
  cfg.seed = 2;
  StraightforwardModel model = init_straightforward(1024, 256, cfg);
  Pcg32 rng(3, "noise");
  Eigen::MatrixXd x = random_matrix(batch, 1024, rng);
  for (auto _ : state) {
    Eigen::MatrixXd y = mlp_forward_batch(model.mlps[0], x);
    benchmark::DoNotOptimize(y.data());
  }
}
BENCHMARK(bm_mlp_forward_batch)->Arg(32)->Arg(128);

void bm_mlp_backward_batch(benchmark::State& state) {
  const Eigen::Index batch = state.range(0);
  TrainConfig cfg;
  cfg.hidden = 512;
  cfg.seed = 2;
  StraightforwardModel model = init_straightforward(1024, 256, cfg);
  Pcg32 rng(3, "noise");
  Eigen::MatrixXd x = random_matrix(batch, 1024, rng);
  Eigen::MatrixXd d_out = random_matrix(batch, 256, rng);
  MlpCache cache;
  mlp_forward_batch(model.mlps[0], x, &cache);
  for (auto _ : state) {
    MlpGrads grads = zero_grads(model.mlps[0]);
    Eigen::MatrixXd dx = mlp_backward(model.mlps[0], cache, d_out, grads);
    benchmark::DoNotOptimize(dx.data());
  }
}
BENCHMARK(bm_mlp_backward_batch)->Arg(32)->Arg(128);

void bm_compute_rdm(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  Pcg32 rng(4, "noise");
  std::vector<Eigen::VectorXd> vecs;
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::VectorXd v(512);
    for (Eigen::Index d = 0; d < 512; ++d) v[d] = rng.next_gaussian();
    vecs.push_back(v);
  }
  for (auto _ : state) {
    Rdm rdm = compute_rdm(vecs);
    benchmark::DoNotOptimize(rdm.values.data());
  }
}
BENCHMARK(bm_compute_rdm)->Arg(62)->Arg(124);

void bm_cider(benchmark::State& state) {
  const char* words[] = {"fox",  "horse", "red",    "blue", "rides", "jumps",
                         "near", "under", "bright", "mill", "a",     "the"};
  Pcg32 rng(5, "noise");
  auto sentence = [&] {
    std::size_t n = 4 + rng.next_below(8);
    std::string s;
    for (std::size_t i = 0; i < n; ++i) {
      if (i) s += ' ';
      s += words[rng.next_below(12)];
    }
    return s;
  };
  std::vector<std::string> cands;
  std::vector<std::vector<std::string>> refs;
  for (int i = 0; i < 200; ++i) {
    cands.push_back(sentence());
    refs.push_back({sentence(), sentence()});
  }
  for (auto _ : state) {
    double score = cider(cands, refs);
    benchmark::DoNotOptimize(score);
  }
}
BENCHMARK(bm_cider);

}  // namespace

BENCHMARK_MAIN();
