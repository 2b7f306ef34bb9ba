#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace memtangle {

// Lowercase, split on non-alphanumeric runs, drop empties; no stemming.
std::vector<std::string> tokenize(const std::string& s);

// Original CIDEr (not CIDEr-D): n-grams n=1..4, TF-IDF cosine per n
// averaged over references then over n, scaled by 10; corpus mean over
// candidates. IDF is presence-based over reference-sets with natural log.
double cider(const std::vector<std::string>& candidates,
             const std::vector<std::vector<std::string>>& references);

// Exact-match METEOR variant: greedy left-to-right one-to-one alignment,
// F = 10PR/(R+9P), penalty = 0.5*(chunks/m)^3, max over references.
double meteor_lite(const std::string& candidate,
                   const std::vector<std::string>& refs);

struct CellKey {
  std::string method;
  double alpha;
  std::size_t k;

  auto operator<=>(const CellKey&) const = default;
};

struct CellStats {
  double mean = 0.0;
  double std_dev = 0.0;  // unbiased sample std; 0 for a single seed
  std::size_t n_seeds = 0;
};

struct MetricReport {
  // (method, alpha, k) -> metric name -> stats over seeds
  std::map<CellKey, std::map<std::string, CellStats>> cells;
  std::vector<std::uint64_t> seeds;
};

// Per-seed metric values for one grid cell, keyed by metric name.
struct SeedScores {
  std::string method;
  double alpha;
  std::size_t k;
  std::uint64_t seed;
  std::map<std::string, double> values;
};

// Aggregate per-seed scores into mean +- std per cell. Every (method,
// alpha, k) cell must cover the same seed set; missing cells raise an
// incompleteness error listing them.
MetricReport aggregate_scores(const std::vector<SeedScores>& scores);

// CSV: method,alpha,k,metric,mean,std,n_seeds
std::string report_csv(const MetricReport& report);

// Text grid: methods x k with mean +- std per metric.
std::string report_table(const MetricReport& report);

}  // namespace memtangle
