#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <map>
#include <unordered_map>

#include "memtangle/errors.hpp"
#include "memtangle/eval.hpp"

namespace memtangle {

std::vector<std::string> tokenize(const std::string& s) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char c : s) {
    if (std::isalnum(c)) {
      current += static_cast<char>(std::tolower(c));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

namespace {

using NgramCounts = std::map<std::vector<std::string>, double>;

NgramCounts ngram_tf(const std::vector<std::string>& tokens, std::size_t n) {
  NgramCounts counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i)
    counts[{tokens.begin() + static_cast<std::ptrdiff_t>(i),
            tokens.begin() + static_cast<std::ptrdiff_t>(i + n)}] += 1.0;
  return counts;
}

double tfidf_cosine(const NgramCounts& a, const NgramCounts& b,
                    const NgramCounts& df, double n_docs) {
  auto idf = [&](const std::vector<std::string>& g) {
    double d = 0.0;
    auto it = df.find(g);
    if (it != df.end()) d = it->second;
    return std::log(n_docs / std::max(1.0, d));
  };
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (const auto& [g, tf] : a) {
    double w = tf * idf(g);
    na += w * w;
    auto it = b.find(g);
    if (it != b.end()) dot += w * (it->second * idf(g));
  }
  for (const auto& [g, tf] : b) {
    double w = tf * idf(g);
    nb += w * w;
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace

double cider(const std::vector<std::string>& candidates,
             const std::vector<std::vector<std::string>>& references) {
  if (candidates.size() != references.size())
    throw ConfigError("cider: candidate/reference count mismatch");
  if (candidates.size() < 2)
    throw ConfigError("cider: corpus must have at least 2 items (IDF is "
                      "degenerate below 2 documents)");
  for (const auto& refs : references)
    if (refs.empty()) throw ConfigError("cider: empty reference set");

  const std::size_t n_items = candidates.size();
  const double n_docs = static_cast<double>(n_items);

  // Presence-based document frequency per n; a document is one
  // reference set.
  std::array<NgramCounts, 4> df;
  std::vector<std::array<std::vector<NgramCounts>, 4>> ref_tfs(n_items);
  for (std::size_t i = 0; i < n_items; ++i) {
    for (std::size_t n = 0; n < 4; ++n)
      ref_tfs[i][n].reserve(references[i].size());
    std::array<NgramCounts, 4> doc_presence;
    for (const auto& ref : references[i]) {
      auto tokens = tokenize(ref);
      for (std::size_t n = 0; n < 4; ++n) {
        NgramCounts tf = ngram_tf(tokens, n + 1);
        for (const auto& [g, c] : tf) doc_presence[n][g] = 1.0;
        ref_tfs[i][n].push_back(std::move(tf));
      }
    }
    for (std::size_t n = 0; n < 4; ++n)
      for (const auto& [g, one] : doc_presence[n]) df[n][g] += 1.0;
  }

  double corpus_sum = 0.0;
  for (std::size_t i = 0; i < n_items; ++i) {
    auto cand_tokens = tokenize(candidates[i]);
    if (cand_tokens.empty()) continue;  // empty candidate scores 0
    double item = 0.0;
    for (std::size_t n = 0; n < 4; ++n) {
      NgramCounts cand_tf = ngram_tf(cand_tokens, n + 1);
      double ref_sum = 0.0;
      for (const auto& ref_tf : ref_tfs[i][n])
        ref_sum += tfidf_cosine(cand_tf, ref_tf, df[n], n_docs);
      item += ref_sum / static_cast<double>(references[i].size());
    }
    corpus_sum += 10.0 * item / 4.0;
  }
  return corpus_sum / n_docs;
}

namespace {

double meteor_one(const std::vector<std::string>& cand,
                  const std::vector<std::string>& ref) {
  if (cand.empty() || ref.empty()) return 0.0;
  // Greedy left-to-right: each candidate token takes the earliest unused
  // identical reference token.
  std::vector<bool> used(ref.size(), false);
  std::vector<std::ptrdiff_t> match_of(cand.size(), -1);
  std::size_t m = 0;
  for (std::size_t i = 0; i < cand.size(); ++i) {
    for (std::size_t j = 0; j < ref.size(); ++j) {
      if (!used[j] && ref[j] == cand[i]) {
        used[j] = true;
        match_of[i] = static_cast<std::ptrdiff_t>(j);
        ++m;
        break;
      }
    }
  }
  if (m == 0) return 0.0;
  double p = static_cast<double>(m) / static_cast<double>(cand.size());
  double r = static_cast<double>(m) / static_cast<double>(ref.size());
  double f_mean = 10.0 * p * r / (r + 9.0 * p);

  // Chunks: maximal runs of matches adjacent in the candidate whose
  // reference positions are also consecutive.
  std::size_t chunks = 0;
  std::ptrdiff_t prev_cand = -2, prev_ref = -2;
  for (std::size_t i = 0; i < cand.size(); ++i) {
    if (match_of[i] < 0) continue;
    bool extends = (static_cast<std::ptrdiff_t>(i) == prev_cand + 1 &&
                    match_of[i] == prev_ref + 1);
    if (!extends) ++chunks;
    prev_cand = static_cast<std::ptrdiff_t>(i);
    prev_ref = match_of[i];
  }
  double frac = static_cast<double>(chunks) / static_cast<double>(m);
  double penalty = 0.5 * frac * frac * frac;
  return f_mean * (1.0 - penalty);
}

}  // namespace

double meteor_lite(const std::string& candidate,
                   const std::vector<std::string>& refs) {
  if (refs.empty()) throw ConfigError("meteor_lite: no references");
  auto cand_tokens = tokenize(candidate);
  double best = 0.0;
  for (const auto& ref : refs)
    best = std::max(best, meteor_one(cand_tokens, tokenize(ref)));
  return best;
}

}  // namespace memtangle
