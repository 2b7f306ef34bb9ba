#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <doctest.h>

#include "memtangle/errors.hpp"
#include "memtangle/eval.hpp"
#include "memtangle/prng.hpp"

using namespace memtangle;

namespace {

// Independent brute-force CIDEr oracle, written against the metric
// definition with no shared code: n-gram keys as joined strings, explicit
// union-cosine, presence-based IDF over reference sets.
std::vector<std::string> oracle_ngrams(const std::vector<std::string>& toks,
                                       std::size_t n) {
  std::vector<std::string> grams;
  if (toks.size() < n) return grams;
  for (std::size_t i = 0; i + n <= toks.size(); ++i) {
    std::string g;
    for (std::size_t j = 0; j < n; ++j) {
      if (j) g += '\x1f';
      g += toks[i + j];
    }
    grams.push_back(g);
  }
  return grams;
}

double oracle_cider(const std::vector<std::string>& cands,
                    const std::vector<std::vector<std::string>>& refs) {
  const double n_docs = static_cast<double>(cands.size());
  double corpus = 0.0;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    double item = 0.0;
    for (std::size_t n = 1; n <= 4; ++n) {
      // document frequency over reference sets
      std::map<std::string, double> df;
      for (const auto& ref_set : refs) {
        std::set<std::string> present;
        for (const auto& ref : ref_set)
          for (const auto& g : oracle_ngrams(tokenize(ref), n))
            present.insert(g);
        for (const auto& g : present) df[g] += 1.0;
      }
      auto idf = [&](const std::string& g) {
        double d = df.count(g) ? df.at(g) : 0.0;
        return std::log(n_docs / std::max(1.0, d));
      };
      auto tf = [&](const std::string& s) {
        std::map<std::string, double> counts;
        for (const auto& g : oracle_ngrams(tokenize(s), n)) counts[g] += 1.0;
        return counts;
      };
      auto cand_tf = tf(cands[i]);
      double ref_avg = 0.0;
      for (const auto& ref : refs[i]) {
        auto ref_tf = tf(ref);
        std::set<std::string> keys;
        for (const auto& [g, c] : cand_tf) keys.insert(g);
        for (const auto& [g, c] : ref_tf) keys.insert(g);
        double dot = 0.0, na = 0.0, nb = 0.0;
        for (const auto& g : keys) {
          double a = (cand_tf.count(g) ? cand_tf.at(g) : 0.0) * idf(g);
          double b = (ref_tf.count(g) ? ref_tf.at(g) : 0.0) * idf(g);
          dot += a * b;
          na += a * a;
          nb += b * b;
        }
        if (na > 0.0 && nb > 0.0) ref_avg += dot / std::sqrt(na * nb);
      }
      item += ref_avg / static_cast<double>(refs[i].size());
    }
    corpus += 10.0 * item / 4.0;
  }
  return corpus / n_docs;
}

const char* kWords[] = {"fox", "horse", "red", "blue", "rides", "jumps",
                        "near", "under", "a", "the", "bright", "mill"};

std::string random_sentence(Pcg32& rng, std::size_t max_tokens) {
  std::size_t n = 1 + rng.next_below(static_cast<std::uint32_t>(max_tokens));
  std::string s;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) s += ' ';
    s += kWords[rng.next_below(12)];
  }
  return s;
}

}  // namespace

TEST_SUITE_BEGIN("eval");

TEST_CASE("tokenize pinned cases") {
  CHECK(tokenize("A man riding a horse.") ==
        std::vector<std::string>{"a", "man", "riding", "a", "horse"});
  CHECK(tokenize("").empty());
  CHECK(tokenize("Giraffe-spotting, 2 p.m.") ==
        std::vector<std::string>{"giraffe", "spotting", "2", "p", "m"});
}

TEST_CASE("cider: identical candidate scores 10 with a disjoint second item") {
  std::vector<std::string> cands = {"a red fox jumps the mill",
                                    "bright horse rides near blue"};
  std::vector<std::vector<std::string>> refs = {
      {"a red fox jumps the mill"}, {"under the spotted lantern canoe"}};
  double score = cider(cands, refs);
  // item 1 has identical TF-IDF vectors at every n (cosine 1 -> 10.0);
  // item 2 shares nothing with its reference (0.0)
  double item1 = 10.0;
  CHECK(score == doctest::Approx((item1 + 0.0) / 2.0).epsilon(1e-9));
}

TEST_CASE("cider: zero overlap scores zero") {
  std::vector<std::string> cands = {"alpha beta gamma", "delta epsilon"};
  std::vector<std::vector<std::string>> refs = {{"one two three"},
                                                {"four five six"}};
  CHECK(cider(cands, refs) == 0.0);
}

TEST_CASE("cider preconditions") {
  CHECK_THROWS_AS(cider({"a"}, {{"a"}}), ConfigError);
  CHECK_THROWS_AS(cider({"a", "b"}, {{"a"}}), ConfigError);
  CHECK_THROWS_AS(cider({"a", "b"}, {{"a"}, {}}), ConfigError);
  // empty candidate contributes 0
  std::vector<std::string> cands = {"", "one two"};
  std::vector<std::vector<std::string>> refs = {{"one two"}, {"one two"}};
  double with_empty = cider(cands, refs);
  CHECK(with_empty >= 0.0);
  CHECK(with_empty < 10.0);
}

TEST_CASE("cider matches the brute-force oracle on random corpora") {
  Pcg32 rng(77, "noise");
  for (int corpus = 0; corpus < 200; ++corpus) {
    std::size_t items = 2 + rng.next_below(4);  // 2..5
    std::vector<std::string> cands;
    std::vector<std::vector<std::string>> refs;
    for (std::size_t i = 0; i < items; ++i) {
      cands.push_back(random_sentence(rng, 8));
      std::vector<std::string> ref_set;
      std::size_t n_refs = 1 + rng.next_below(3);
      for (std::size_t r = 0; r < n_refs; ++r)
        ref_set.push_back(random_sentence(rng, 8));
      refs.push_back(std::move(ref_set));
    }
    double got = cider(cands, refs);
    double want = oracle_cider(cands, refs);
    CHECK(got == doctest::Approx(want).epsilon(1e-9));
    CHECK(got >= -1e-12);
    CHECK(got <= 10.0 + 1e-9);
  }
}

TEST_CASE("meteor_lite: identical 5-token sentence scores 1 - 0.5/125") {
  std::string s = "a red fox jumps high";
  double expected = 1.0 - 0.5 / 125.0;  // P=R=1, chunks=1, m=5
  CHECK(meteor_lite(s, {s}) == doctest::Approx(expected).epsilon(1e-9));
  CHECK(meteor_lite(s, {s}) == doctest::Approx(0.996).epsilon(1e-9));
}

TEST_CASE("meteor_lite: zero overlap scores 0") {
  CHECK(meteor_lite("alpha beta", {"gamma delta"}) == 0.0);
  CHECK(meteor_lite("", {"gamma delta"}) == 0.0);
}

TEST_CASE("meteor_lite: reversed 3-token reference halves the F-mean") {
  // candidate = reversed reference, all tokens distinct: m=3, every match
  // is its own chunk -> penalty 0.5, P=R=1 -> F=1, score 0.5
  CHECK(meteor_lite("c b a", {"a b c"}) == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("meteor_lite: hand-traced partial overlap") {
  // cand: "the cat sat", ref: "the cat slept": m=2 (the, cat), P=2/3,
  // R=2/3, F = 10PR/(R+9P) = (10*4/9)/(20/3) = 2/3; one chunk of 2 ->
  // penalty 0.5*(1/2)^3 = 1/16; score = (2/3)*(15/16) = 0.625
  CHECK(meteor_lite("the cat sat", {"the cat slept"}) ==
        doctest::Approx(0.625).epsilon(1e-9));
}

TEST_CASE("meteor_lite: max over references, monotone precision drop") {
  std::string perfect = "a red fox jumps high";
  CHECK(meteor_lite(perfect, {"nothing shared here", perfect}) ==
        doctest::Approx(1.0 - 0.5 / 125.0).epsilon(1e-12));
  double padded =
      meteor_lite(perfect + " unrelated trailing words", {perfect});
  CHECK(padded < meteor_lite(perfect, {perfect}));
  CHECK_THROWS_AS(meteor_lite("x", {}), ConfigError);
}

TEST_CASE("aggregate: mean and std match independent recomputation") {
  std::vector<SeedScores> scores;
  std::vector<double> vals = {0.2, 0.5, 0.8};
  for (std::size_t i = 0; i < 3; ++i) {
    SeedScores s;
    s.method = "dis";
    s.alpha = 0.01;
    s.k = 0;
    s.seed = i + 1;
    s.values["cider"] = vals[i];
    scores.push_back(s);
  }
  auto report = aggregate_scores(scores);
  const auto& stats = report.cells.at({"dis", 0.01, 0}).at("cider");
  double mean = (0.2 + 0.5 + 0.8) / 3.0;
  double var = ((0.2 - mean) * (0.2 - mean) + (0.5 - mean) * (0.5 - mean) +
                (0.8 - mean) * (0.8 - mean)) /
               2.0;
  CHECK(stats.mean == doctest::Approx(mean).epsilon(1e-12));
  CHECK(stats.std_dev == doctest::Approx(std::sqrt(var)).epsilon(1e-12));
  CHECK(stats.n_seeds == 3);
}

TEST_CASE("aggregate: single seed reports std 0; missing cells listed") {
  SeedScores s;
  s.method = "sf";
  s.alpha = 0.0;
  s.k = 0;
  s.seed = 1;
  s.values["cider"] = 1.0;
  auto report = aggregate_scores({s});
  CHECK(report.cells.at({"sf", 0.0, 0}).at("cider").std_dev == 0.0);

  // two cells, two seeds, one hole
  SeedScores a = s, b = s, c = s;
  b.k = 1;
  c.seed = 2;  // (sf, 0, 0) seed 2 present; (sf, 0, 1) seed 2 missing
  CHECK_THROWS_WITH_AS(aggregate_scores({a, b, c}),
                       doctest::Contains("missing"), IncompleteInputError);
  CHECK_THROWS_AS(aggregate_scores({a, a}), ConfigError);  // duplicate
}

TEST_CASE("report csv and table shapes") {
  SeedScores s;
  s.method = "dis";
  s.alpha = 0.1;
  s.k = 2;
  s.seed = 9;
  s.values["cider"] = 3.5;
  s.values["meteor_lite"] = 0.4;
  auto report = aggregate_scores({s});
  std::string csv = report_csv(report);
  CHECK(csv.rfind("method,alpha,k,metric,mean,std,n_seeds\n", 0) == 0);
  CHECK(csv.find("dis,0.1,2,cider,3.5,0,1") != std::string::npos);
  std::string table = report_table(report);
  CHECK(table.find("k=2") != std::string::npos);
  CHECK(table.find("dis") != std::string::npos);
}

TEST_SUITE_END();
