#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "memtangle/dataset.hpp"

namespace memtangle {

struct RidgeConfig {
  double lambda = 1.0;
  std::size_t max_k = 9;

  void validate() const;
};

struct RidgeModel {
  Eigen::MatrixXd W;     // p x q, maps centered inputs to centered outputs
  Eigen::VectorXd bias;  // q
};

// Symmetric dissimilarity matrix with zero diagonal; entries are
// 1 - Pearson, so they live in [0, 2].
struct Rdm {
  Eigen::MatrixXd values;

  std::size_t size() const { return static_cast<std::size_t>(values.rows()); }
};

struct RsaResult {
  std::vector<std::size_t> ks;
  std::vector<double> per_k;  // rho_{k,ave} averaged over sessions
  // (session_id, k, rho_{k,ave}) breakdown
  std::vector<std::tuple<std::size_t, std::size_t, double>> per_session;
};

// Standard Pearson correlation. Throws DataError on constant input,
// ConfigError on length mismatch or length < 2.
double pearson(std::span<const double> a, std::span<const double> b);

// Closed-form ridge: primal (X'X + lambda I)^-1 X'Y when p <= n,
// dual X'(XX' + lambda I)^-1 Y when p > n. Columns of X are centered
// internally; the bias absorbs the means.
RidgeModel ridge_fit(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                     double lambda);

Eigen::MatrixXd ridge_predict(const RidgeModel& model, const Eigen::MatrixXd& X);

struct OffsetScore {
  std::size_t k;
  double score;
};

// Per-offset ridge analysis: pairs <F_t, C_{t-k}> within runs, test-set
// image marking as in the core split, score = mean per-test-item Pearson.
std::vector<OffsetScore> ridge_offset_analysis(const Dataset& dataset,
                                               const RidgeConfig& cfg,
                                               const SplitConfig& split);

// Same pipeline with targets permuted by a seeded shuffle: the "rand"
// lower bound.
double ridge_random_baseline(const Dataset& dataset, const RidgeConfig& cfg,
                             const SplitConfig& split);

Rdm compute_rdm(const std::vector<Eigen::VectorXd>& vectors);

// rho_{k,ave}: row t of rdm_c against row t+k of rdm_f, with the two
// self-dissimilarity columns (t and t+k) removed from both rows.
double trialwise_rsa(const Rdm& rdm_f, const Rdm& rdm_c, std::size_t k);

RsaResult rsa_over_sessions(const Dataset& dataset, std::size_t max_k);

// Signal-vs-signal variant: both RDMs are RDM_f, k ranges 1..max_k.
RsaResult fmri_auto_rsa(const Dataset& dataset, std::size_t max_k);

// CSV emission, 9 significant digits, LF line endings.
std::string ridge_curve_csv(const std::vector<OffsetScore>& curve,
                            double baseline);
std::string rsa_curve_csv(const RsaResult& result);

}  // namespace memtangle
