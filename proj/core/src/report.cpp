#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <set>

#include "memtangle/errors.hpp"
#include "memtangle/eval.hpp"

namespace memtangle {

MetricReport aggregate_scores(const std::vector<SeedScores>& scores) {
  if (scores.empty()) throw IncompleteInputError("aggregate: no scores");

  std::set<std::uint64_t> seed_set;
  std::set<CellKey> keys;
  for (const auto& s : scores) {
    seed_set.insert(s.seed);
    keys.insert({s.method, s.alpha, s.k});
  }

  // (cell, seed) -> values; detect holes in the grid.
  std::map<std::pair<CellKey, std::uint64_t>,
           const std::map<std::string, double>*>
      grid;
  for (const auto& s : scores) {
    auto key = std::make_pair(CellKey{s.method, s.alpha, s.k}, s.seed);
    if (!grid.emplace(key, &s.values).second)
      throw ConfigError("aggregate: duplicate cell (" + s.method + ", alpha=" +
                        std::to_string(s.alpha) + ", k=" + std::to_string(s.k) +
                        ", seed=" + std::to_string(s.seed) + ")");
  }
  std::string missing;
  for (const auto& key : keys)
    for (std::uint64_t seed : seed_set)
      if (!grid.contains({key, seed})) {
        missing += "\n  (" + key.method + ", alpha=" + std::to_string(key.alpha) +
                   ", k=" + std::to_string(key.k) + ", seed=" +
                   std::to_string(seed) + ")";
      }
  if (!missing.empty())
    throw IncompleteInputError("aggregate: missing cells:" + missing);

  if (seed_set.size() == 1)
    std::cerr << "warning: single seed; reported std is 0\n";

  MetricReport report;
  report.seeds.assign(seed_set.begin(), seed_set.end());
  const double n = static_cast<double>(seed_set.size());
  for (const auto& key : keys) {
    std::set<std::string> metric_names;
    for (std::uint64_t seed : seed_set)
      for (const auto& [name, v] : *grid.at({key, seed}))
        metric_names.insert(name);
    for (const auto& name : metric_names) {
      std::vector<double> vals;
      for (std::uint64_t seed : seed_set) {
        const auto& m = *grid.at({key, seed});
        auto it = m.find(name);
        if (it == m.end())
          throw IncompleteInputError("aggregate: metric '" + name +
                                     "' missing for seed " +
                                     std::to_string(seed));
        vals.push_back(it->second);
      }
      CellStats stats;
      stats.n_seeds = vals.size();
      for (double v : vals) stats.mean += v;
      stats.mean /= n;
      if (vals.size() > 1) {
        double ss = 0.0;
        for (double v : vals) ss += (v - stats.mean) * (v - stats.mean);
        stats.std_dev = std::sqrt(ss / (n - 1.0));
      }
      report.cells[key][name] = stats;
    }
  }
  return report;
}

std::string report_csv(const MetricReport& report) {
  std::string out = "method,alpha,k,metric,mean,std,n_seeds\n";
  char buf[256];
  for (const auto& [key, metrics] : report.cells) {
    for (const auto& [name, stats] : metrics) {
      std::snprintf(buf, sizeof(buf), "%s,%.9g,%zu,%s,%.9g,%.9g,%zu\n",
                    key.method.c_str(), key.alpha, key.k, name.c_str(),
                    stats.mean, stats.std_dev, stats.n_seeds);
      out += buf;
    }
  }
  return out;
}

std::string report_table(const MetricReport& report) {
  std::set<std::string> metric_names;
  std::set<std::size_t> ks;
  std::set<std::pair<std::string, double>> rows;
  for (const auto& [key, metrics] : report.cells) {
    ks.insert(key.k);
    rows.insert({key.method, key.alpha});
    for (const auto& [name, s] : metrics) metric_names.insert(name);
  }

  std::string out;
  char buf[256];
  for (const auto& name : metric_names) {
    out += name + "\n";
    std::snprintf(buf, sizeof(buf), "%-20s %-8s", "method", "alpha");
    out += buf;
    for (std::size_t k : ks) {
      std::snprintf(buf, sizeof(buf), " %18s", ("k=" + std::to_string(k)).c_str());
      out += buf;
    }
    out += '\n';
    for (const auto& [method, alpha] : rows) {
      // Straightforward models take no contrastive weight.
      std::string alpha_text = method == "straightforward"
                                   ? "_"
                                   : [&] {
                                       char a[32];
                                       std::snprintf(a, sizeof(a), "%g", alpha);
                                       return std::string(a);
                                     }();
      std::snprintf(buf, sizeof(buf), "%-20s %-8s", method.c_str(),
                    alpha_text.c_str());
      out += buf;
      for (std::size_t k : ks) {
        auto cell = report.cells.find({method, alpha, k});
        if (cell == report.cells.end() || !cell->second.contains(name)) {
          std::snprintf(buf, sizeof(buf), " %18s", "-");
        } else {
          const auto& s = cell->second.at(name);
          char val[64];
          std::snprintf(val, sizeof(val), "%.4f +- %.4f", s.mean, s.std_dev);
          std::snprintf(buf, sizeof(buf), " %18s", val);
        }
        out += buf;
      }
      out += '\n';
    }
    out += '\n';
  }
  return out;
}

}  // namespace memtangle
