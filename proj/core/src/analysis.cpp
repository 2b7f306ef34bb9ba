#include "memtangle/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <numeric>
#include <unordered_set>

#include "memtangle/errors.hpp"
#include "memtangle/prng.hpp"

namespace memtangle {

void RidgeConfig::validate() const {
  if (lambda < 0.0) throw ConfigError("RidgeConfig: lambda must be >= 0");
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw ConfigError("pearson: length mismatch " + std::to_string(a.size()) +
                      " vs " + std::to_string(b.size()));
  const std::size_t n = a.size();
  if (n < 2) throw ConfigError("pearson: need at least 2 elements");
  double mean_a = 0.0, mean_b = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mean_a += a[i];
    mean_b += b[i];
  }
  mean_a /= static_cast<double>(n);
  mean_b /= static_cast<double>(n);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double da = a[i] - mean_a;
    double db = b[i] - mean_b;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0) throw DataError("pearson: first input is constant");
  if (sbb == 0.0) throw DataError("pearson: second input is constant");
  // Single sqrt of the product keeps pearson(x, x) == 1.0 exactly.
  return sab / std::sqrt(saa * sbb);
}

RidgeModel ridge_fit(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                     double lambda) {
  const auto n = X.rows();
  const auto p = X.cols();
  const auto q = Y.cols();
  if (Y.rows() != n)
    throw ConfigError("ridge_fit: X and Y row counts differ");
  if (n < 2) throw ConfigError("ridge_fit: need at least 2 rows");
  if (lambda < 0.0) throw ConfigError("ridge_fit: lambda must be >= 0");

  Eigen::RowVectorXd x_mean = X.colwise().mean();
  Eigen::RowVectorXd y_mean = Y.colwise().mean();
  Eigen::MatrixXd Xc = X.rowwise() - x_mean;
  Eigen::MatrixXd Yc = Y.rowwise() - y_mean;

  RidgeModel model;
  if (p <= n) {
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(p, p);
    G.selfadjointView<Eigen::Lower>().rankUpdate(Xc.transpose());
    G.triangularView<Eigen::StrictlyUpper>() =
        G.triangularView<Eigen::StrictlyLower>().transpose();
    G.diagonal().array() += lambda;
    if (lambda == 0.0) {
      Eigen::FullPivLU<Eigen::MatrixXd> lu(G);
      if (!lu.isInvertible()) {
        double dmax = lu.matrixLU().diagonal().cwiseAbs().maxCoeff();
        double dmin = lu.matrixLU().diagonal().cwiseAbs().minCoeff();
        throw NumericError(
            "ridge_fit: singular normal equations at lambda=0 (rank " +
            std::to_string(lu.rank()) + " of " + std::to_string(p) +
            ", pivot ratio " + std::to_string(dmin / dmax) + ")");
      }
      model.W = lu.solve(Xc.transpose() * Yc);
    } else {
      model.W = Eigen::LDLT<Eigen::MatrixXd>(G).solve(Xc.transpose() * Yc);
    }
  } else {
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n, n);
    K.selfadjointView<Eigen::Lower>().rankUpdate(Xc);
    K.triangularView<Eigen::StrictlyUpper>() =
        K.triangularView<Eigen::StrictlyLower>().transpose();
    K.diagonal().array() += lambda;
    if (lambda == 0.0) {
      Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
      if (!lu.isInvertible()) {
        double dmax = lu.matrixLU().diagonal().cwiseAbs().maxCoeff();
        double dmin = lu.matrixLU().diagonal().cwiseAbs().minCoeff();
        throw NumericError(
            "ridge_fit: singular Gram matrix at lambda=0 (rank " +
            std::to_string(lu.rank()) + " of " + std::to_string(n) +
            ", pivot ratio " + std::to_string(dmin / dmax) + ")");
      }
      model.W = Xc.transpose() * lu.solve(Yc);
    } else {
      model.W = Xc.transpose() * Eigen::LDLT<Eigen::MatrixXd>(K).solve(Yc);
    }
  }
  if (!model.W.allFinite())
    throw NumericError("ridge_fit: non-finite solution");
  model.bias = (y_mean - x_mean * model.W).transpose();
  (void)q;
  return model;
}

Eigen::MatrixXd ridge_predict(const RidgeModel& model,
                              const Eigen::MatrixXd& X) {
  if (X.cols() != model.W.rows())
    throw DataError("ridge_predict: input width " + std::to_string(X.cols()) +
                    " != model input width " + std::to_string(model.W.rows()));
  return (X * model.W).rowwise() + model.bias.transpose();
}

namespace {

struct OffsetPair {
  const std::vector<float>* fmri;       // F_t
  const std::vector<float>* embedding;  // C_{t-k}
  std::uint64_t target_image_id;
};

// Pairs <F_t, C_{t-k}> within runs only; offset never crosses a run
// boundary (rest periods break stimulus continuity).
std::vector<OffsetPair> collect_pairs(const Dataset& dataset, std::size_t k) {
  auto index = dataset.image_index();
  std::vector<OffsetPair> pairs;
  for (const auto& session : dataset.sessions) {
    for (const Run& run : session) {
      if (run.size() <= k) continue;
      for (std::size_t t = k; t < run.size(); ++t) {
        const Trial& past = run[t - k];
        pairs.push_back({&run[t].fmri,
                         &dataset.images[index.at(past.image_id)].embedding,
                         past.image_id});
      }
    }
  }
  return pairs;
}

double mean_test_pearson(const std::vector<OffsetPair>& pairs,
                         const SplitConfig& split, double lambda,
                         std::string_view stream, std::uint32_t d_f,
                         std::uint32_t d_c, std::size_t k) {
  if (pairs.empty())
    throw DataError("ridge analysis: no pairs at offset k=" +
                    std::to_string(k) + " (runs too short)");
  if (split.m == 0 || split.m >= pairs.size())
    throw ConfigError("ridge analysis: test size m=" + std::to_string(split.m) +
                      " must be in [1, pair count " +
                      std::to_string(pairs.size()) + ") at k=" +
                      std::to_string(k));

  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  Pcg32 rng(split.seed, stream);
  rng.shuffle(order);

  std::unordered_set<std::uint64_t> marked;
  for (std::size_t i = 0; i < split.m; ++i)
    marked.insert(pairs[order[i]].target_image_id);

  std::vector<std::size_t> train_idx;
  for (std::size_t i = split.m; i < order.size(); ++i)
    if (!marked.contains(pairs[order[i]].target_image_id))
      train_idx.push_back(order[i]);
  if (train_idx.empty())
    throw DataError("ridge analysis: over-contaminated split at k=" +
                    std::to_string(k));
  if (train_idx.size() < 2)
    throw DataError("ridge analysis: only " + std::to_string(train_idx.size()) +
                    " training pair(s) left at offset k=" + std::to_string(k));

  Eigen::MatrixXd X(train_idx.size(), d_f);
  Eigen::MatrixXd Y(train_idx.size(), d_c);
  for (std::size_t i = 0; i < train_idx.size(); ++i) {
    const OffsetPair& pr = pairs[train_idx[i]];
    for (std::uint32_t d = 0; d < d_f; ++d) X(i, d) = (*pr.fmri)[d];
    for (std::uint32_t d = 0; d < d_c; ++d) Y(i, d) = (*pr.embedding)[d];
  }
  RidgeModel model = ridge_fit(X, Y, lambda);

  Eigen::MatrixXd Xt(split.m, d_f);
  Eigen::MatrixXd Yt(split.m, d_c);
  for (std::size_t i = 0; i < split.m; ++i) {
    const OffsetPair& pr = pairs[order[i]];
    for (std::uint32_t d = 0; d < d_f; ++d) Xt(i, d) = (*pr.fmri)[d];
    for (std::uint32_t d = 0; d < d_c; ++d) Yt(i, d) = (*pr.embedding)[d];
  }
  Eigen::MatrixXd P = ridge_predict(model, Xt);

  double total = 0.0;
  std::vector<double> pred(d_c), target(d_c);
  for (std::size_t i = 0; i < split.m; ++i) {
    for (std::uint32_t d = 0; d < d_c; ++d) {
      pred[d] = P(static_cast<Eigen::Index>(i), d);
      target[d] = Yt(static_cast<Eigen::Index>(i), d);
    }
    total += pearson(pred, target);
  }
  return total / static_cast<double>(split.m);
}

}  // namespace

std::vector<OffsetScore> ridge_offset_analysis(const Dataset& dataset,
                                               const RidgeConfig& cfg,
                                               const SplitConfig& split) {
  cfg.validate();
  dataset.validate();
  std::vector<OffsetScore> curve;
  curve.reserve(cfg.max_k + 1);
  for (std::size_t k = 0; k <= cfg.max_k; ++k) {
    auto pairs = collect_pairs(dataset, k);
    double score = mean_test_pearson(pairs, split, cfg.lambda, "split",
                                     dataset.d_f, dataset.d_c, k);
    curve.push_back({k, score});
  }
  return curve;
}

double ridge_random_baseline(const Dataset& dataset, const RidgeConfig& cfg,
                             const SplitConfig& split) {
  cfg.validate();
  dataset.validate();
  auto pairs = collect_pairs(dataset, 0);
  // Randomly re-match signals and embeddings, then run the identical
  // split/fit/score pipeline.
  std::vector<std::size_t> perm(pairs.size());
  std::iota(perm.begin(), perm.end(), 0);
  Pcg32 rng(split.seed, "baseline");
  rng.shuffle(perm);
  std::vector<OffsetPair> shuffled(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    shuffled[i] = pairs[i];
    shuffled[i].embedding = pairs[perm[i]].embedding;
    shuffled[i].target_image_id = pairs[perm[i]].target_image_id;
  }
  return mean_test_pearson(shuffled, split, cfg.lambda, "split", dataset.d_f,
                           dataset.d_c, 0);
}

Rdm compute_rdm(const std::vector<Eigen::VectorXd>& vectors) {
  const std::size_t n = vectors.size();
  if (n < 2) throw ConfigError("compute_rdm: need at least 2 vectors");
  const auto d = vectors[0].size();
  if (d < 2) throw ConfigError("compute_rdm: vectors must have length >= 2");
  // Standardize rows once, then one symmetric product gives all Pearsons.
  Eigen::MatrixXd Z(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    if (vectors[i].size() != d)
      throw ConfigError("compute_rdm: vector " + std::to_string(i) +
                        " length mismatch");
    Eigen::VectorXd c =
        vectors[i].array() - vectors[i].mean();
    double norm = c.norm();
    if (norm == 0.0)
      throw DataError("compute_rdm: vector " + std::to_string(i) +
                      " is constant");
    Z.row(i) = (c / norm).transpose();
  }
  Eigen::MatrixXd corr = Z * Z.transpose();
  Rdm rdm;
  rdm.values = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      double v = 1.0 - corr(i, j);
      rdm.values(i, j) = v;
      rdm.values(j, i) = v;
    }
  return rdm;
}

double trialwise_rsa(const Rdm& rdm_f, const Rdm& rdm_c, std::size_t k) {
  const std::size_t n = rdm_c.size();
  if (rdm_f.size() != n)
    throw ConfigError("trialwise_rsa: RDM sizes differ");
  if (k + 1 >= n)
    throw ConfigError("trialwise_rsa: offset k=" + std::to_string(k) +
                      " too large for RDM of size " + std::to_string(n));
  double total = 0.0;
  std::size_t count = 0;
  std::vector<double> row_c, row_f;
  for (std::size_t t = 0; t + k < n; ++t) {
    const std::size_t tf = t + k;
    row_c.clear();
    row_f.clear();
    // Drop the self-dissimilarity columns (t and t+k) from both rows;
    // structural zeros at different positions would inject artifactual
    // correlation.
    for (std::size_t j = 0; j < n; ++j) {
      if (j == t || j == tf) continue;
      row_c.push_back(rdm_c.values(t, j));
      row_f.push_back(rdm_f.values(tf, j));
    }
    total += pearson(row_c, row_f);
    ++count;
  }
  return total / static_cast<double>(count);
}

namespace {

// Per-session trial sequences, runs concatenated in order.
void session_sequences(const Dataset& dataset, std::size_t s,
                       std::vector<Eigen::VectorXd>& fmri,
                       std::vector<Eigen::VectorXd>& emb) {
  auto index = dataset.image_index();
  fmri.clear();
  emb.clear();
  for (const Run& run : dataset.sessions[s]) {
    for (const Trial& trial : run) {
      Eigen::VectorXd f(dataset.d_f);
      for (std::uint32_t d = 0; d < dataset.d_f; ++d) f[d] = trial.fmri[d];
      fmri.push_back(std::move(f));
      const auto& e = dataset.images[index.at(trial.image_id)].embedding;
      Eigen::VectorXd c(dataset.d_c);
      for (std::uint32_t d = 0; d < dataset.d_c; ++d) c[d] = e[d];
      emb.push_back(std::move(c));
    }
  }
}

RsaResult rsa_impl(const Dataset& dataset, std::size_t max_k, bool auto_rsa) {
  dataset.validate();
  const std::size_t k_begin = auto_rsa ? 1 : 0;
  RsaResult result;
  for (std::size_t k = k_begin; k <= max_k; ++k) result.ks.push_back(k);
  std::vector<double> sums(result.ks.size(), 0.0);
  std::size_t used_sessions = 0;

  std::vector<Eigen::VectorXd> fmri, emb;
  for (std::size_t s = 0; s < dataset.sessions.size(); ++s) {
    session_sequences(dataset, s, fmri, emb);
    if (fmri.size() < max_k + 2) {
      std::cerr << "rsa: skipping session " << s << " with only "
                << fmri.size() << " trials (need " << (max_k + 2) << ")\n";
      continue;
    }
    Rdm rdm_f = compute_rdm(fmri);
    Rdm rdm_c = auto_rsa ? rdm_f : compute_rdm(emb);
    for (std::size_t i = 0; i < result.ks.size(); ++i) {
      double rho = trialwise_rsa(rdm_f, rdm_c, result.ks[i]);
      sums[i] += rho;
      result.per_session.emplace_back(s, result.ks[i], rho);
    }
    ++used_sessions;
  }
  if (used_sessions == 0)
    throw DataError("rsa: every session was too short for max_k=" +
                    std::to_string(max_k));
  result.per_k.resize(result.ks.size());
  for (std::size_t i = 0; i < result.ks.size(); ++i)
    result.per_k[i] = sums[i] / static_cast<double>(used_sessions);
  return result;
}

std::string fmt9(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace

RsaResult rsa_over_sessions(const Dataset& dataset, std::size_t max_k) {
  return rsa_impl(dataset, max_k, false);
}

RsaResult fmri_auto_rsa(const Dataset& dataset, std::size_t max_k) {
  return rsa_impl(dataset, max_k, true);
}

std::string ridge_curve_csv(const std::vector<OffsetScore>& curve,
                            double baseline) {
  std::string out = "k,score,baseline\n";
  for (const auto& pt : curve)
    out += std::to_string(pt.k) + "," + fmt9(pt.score) + "," + fmt9(baseline) +
           "\n";
  return out;
}

std::string rsa_curve_csv(const RsaResult& result) {
  std::string out = "k,rho_ave\n";
  for (std::size_t i = 0; i < result.ks.size(); ++i)
    out += std::to_string(result.ks[i]) + "," + fmt9(result.per_k[i]) + "\n";
  return out;
}

}  // namespace memtangle
