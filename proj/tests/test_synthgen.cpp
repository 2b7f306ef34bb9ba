#include <cmath>
#include <map>
#include <set>

#include <doctest.h>

#include "memtangle/dataset.hpp"
#include "memtangle/errors.hpp"
#include "memtangle/synthgen.hpp"

using namespace memtangle;

namespace {

GenConfig small_cfg() {
  GenConfig cfg;
  cfg.n_images = 24;
  cfg.n_sessions = 1;
  cfg.runs_per_session = 2;
  cfg.trials_per_run = 36;
  cfg.repeats = 3;
  cfg.d_f = 16;
  cfg.d_c = 8;
  cfg.seed = 3;
  return cfg;
}

}  // namespace

TEST_SUITE_BEGIN("synthgen");

TEST_CASE("embeddings are unit norm") {
  GenConfig cfg = small_cfg();
  cfg.n_images = 1;
  cfg.repeats = 72;
  auto recs = gen_concepts(cfg);
  REQUIRE(recs.size() == 1);
  double norm2 = 0.0;
  for (float x : recs[0].embedding) norm2 += double(x) * x;
  CHECK(std::abs(std::sqrt(norm2) - 1.0) < 1e-6);
}

TEST_CASE("gen_concepts is deterministic") {
  auto a = gen_concepts(small_cfg());
  auto b = gen_concepts(small_cfg());
  CHECK(a == b);
}

TEST_CASE("100 images get pairwise-distinct captions") {
  GenConfig cfg = small_cfg();
  cfg.n_images = 100;
  cfg.repeats = 3;
  cfg.n_sessions = 1;
  cfg.runs_per_session = 5;
  cfg.trials_per_run = 60;
  cfg.seed = 3;
  auto recs = gen_concepts(cfg);
  std::set<std::string> captions;
  for (const auto& r : recs) {
    REQUIRE(r.captions.size() == 1);
    captions.insert(r.captions[0]);
  }
  CHECK(captions.size() == 100);
}

TEST_CASE("schedule places every image exactly repeats times") {
  GenConfig cfg;
  cfg.n_images = 4;
  cfg.repeats = 3;
  cfg.n_sessions = 1;
  cfg.runs_per_session = 2;
  cfg.trials_per_run = 6;
  cfg.d_f = 4;
  cfg.d_c = 2;
  cfg.seed = 5;
  auto schedule = gen_schedule(cfg);
  std::map<std::uint64_t, int> counts;
  for (const auto& session : schedule)
    for (const auto& run : session)
      for (auto id : run) counts[id]++;
  REQUIRE(counts.size() == 4);
  for (const auto& [id, c] : counts) CHECK(c == 3);
}

TEST_CASE("fill-constraint violation names both sides") {
  GenConfig cfg;
  cfg.n_images = 5;
  cfg.repeats = 3;
  cfg.n_sessions = 1;
  cfg.runs_per_session = 2;
  cfg.trials_per_run = 6;
  cfg.seed = 0;
  CHECK_THROWS_WITH_AS(cfg.validate(),
                       doctest::Contains("15"), ConfigError);
  CHECK_THROWS_WITH_AS(cfg.validate(),
                       doctest::Contains("12"), ConfigError);
}

TEST_CASE("noiseless single-weight signal is exactly A*C0") {
  GenConfig cfg;
  cfg.n_images = 1;
  cfg.repeats = 1;
  cfg.n_sessions = 1;
  cfg.runs_per_session = 1;
  cfg.trials_per_run = 1;
  cfg.d_f = 6;
  cfg.d_c = 3;
  cfg.decay_weights = {1.0};
  cfg.noise_sigma = 0.0;
  cfg.seed = 9;
  auto concepts = gen_concepts(cfg);
  auto model = make_mixing_model(cfg);
  auto ds = gen_signals(gen_schedule(cfg), concepts, model, cfg);
  Eigen::VectorXd c(3);
  for (int d = 0; d < 3; ++d) c[d] = concepts[0].embedding[d];
  Eigen::VectorXd expected = model.A * c;
  const auto& fmri = ds.sessions[0][0][0].fmri;
  for (int d = 0; d < 6; ++d)
    CHECK(fmri[d] == doctest::Approx(expected[d]).epsilon(1e-6));
}

TEST_CASE("weights [1,1] on a repeated image double the signal") {
  GenConfig cfg;
  cfg.n_images = 1;
  cfg.repeats = 2;
  cfg.n_sessions = 1;
  cfg.runs_per_session = 1;
  cfg.trials_per_run = 2;
  cfg.d_f = 6;
  cfg.d_c = 3;
  cfg.decay_weights = {1.0, 1.0};
  cfg.noise_sigma = 0.0;
  cfg.seed = 9;
  auto concepts = gen_concepts(cfg);
  auto model = make_mixing_model(cfg);
  auto ds = gen_signals(gen_schedule(cfg), concepts, model, cfg);
  const auto& f0 = ds.sessions[0][0][0].fmri;
  const auto& f1 = ds.sessions[0][0][1].fmri;
  for (int d = 0; d < 6; ++d)
    CHECK(f1[d] == doctest::Approx(2.0f * f0[d]).epsilon(1e-5));
}

TEST_CASE("memory resets at run boundaries") {
  // Same image in both runs; with weights [1, 1] the first trial of each
  // run must carry only the current term.
  GenConfig cfg;
  cfg.n_images = 1;
  cfg.repeats = 2;
  cfg.n_sessions = 1;
  cfg.runs_per_session = 2;
  cfg.trials_per_run = 1;
  cfg.d_f = 5;
  cfg.d_c = 3;
  cfg.decay_weights = {1.0, 1.0};
  cfg.noise_sigma = 0.0;
  cfg.seed = 2;
  auto ds = generate_dataset(cfg);
  const auto& f0 = ds.sessions[0][0][0].fmri;
  const auto& f1 = ds.sessions[0][1][0].fmri;
  CHECK(f0 == f1);
}

TEST_CASE("noise empirical variance is within 5% of sigma^2") {
  GenConfig cfg;
  cfg.n_images = 50;
  cfg.repeats = 2;
  cfg.n_sessions = 1;
  cfg.runs_per_session = 2;
  cfg.trials_per_run = 50;
  cfg.d_f = 64;
  cfg.d_c = 4;
  cfg.decay_weights = {1.0};
  cfg.noise_sigma = 0.5;
  cfg.seed = 1;
  auto concepts = gen_concepts(cfg);
  auto schedule = gen_schedule(cfg);
  auto model = make_mixing_model(cfg);
  auto ds = gen_signals(schedule, concepts, model, cfg);
  // subtract the known clean signal, then measure residual variance
  double sum = 0.0, sumsq = 0.0;
  std::size_t n = 0;
  for (const auto& session : ds.sessions)
    for (const auto& run : session)
      for (const auto& trial : run) {
        Eigen::VectorXd c(cfg.d_c);
        for (std::uint32_t d = 0; d < cfg.d_c; ++d)
          c[d] = concepts[trial.image_id].embedding[d];
        Eigen::VectorXd clean = model.A * c;
        for (std::uint32_t d = 0; d < cfg.d_f; ++d) {
          double eps = trial.fmri[d] - clean[d];
          sum += eps;
          sumsq += eps * eps;
          ++n;
        }
      }
  double mean = sum / static_cast<double>(n);
  double var = sumsq / static_cast<double>(n) - mean * mean;
  CHECK(std::abs(var - 0.25) < 0.0125);
}

TEST_CASE("expected retention curve pads with zeros") {
  GenConfig cfg = small_cfg();
  cfg.decay_weights = {1.0, 0.6, 0.3, 0.1};
  auto curve = expected_retention_curve(cfg, 5);
  CHECK(curve == std::vector<double>{1.0, 0.6, 0.3, 0.1, 0.0, 0.0});
  cfg.decay_weights = {1.0};
  CHECK(expected_retention_curve(cfg, 2) == std::vector<double>{1.0, 0.0, 0.0});
}

TEST_CASE("generated datasets validate and window cleanly") {
  auto ds = generate_dataset(small_cfg());
  CHECK_NOTHROW(ds.validate());
  CHECK(build_windows(ds).size() == 2 * (36 - 2));
}

TEST_CASE("GenConfig JSON round-trip") {
  GenConfig cfg = small_cfg();
  GenConfig back = GenConfig::from_json_text(cfg.to_json_text());
  CHECK(back.n_images == cfg.n_images);
  CHECK(back.decay_weights == cfg.decay_weights);
  CHECK(back.seed == cfg.seed);
  CHECK_THROWS_AS(GenConfig::from_json_text("{not json"), ConfigError);
  CHECK_THROWS_AS(GenConfig::from_json_text("{}"), ConfigError);
}

TEST_SUITE_END();
