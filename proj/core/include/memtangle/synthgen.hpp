#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "memtangle/dataset.hpp"

namespace memtangle {

// NSD-shaped synthetic generator configuration. The signal at trial t is a
// known decaying mixture of current and past stimulus embeddings, so the
// retention analyses have ground truth to recover.
struct GenConfig {
  std::size_t n_images = 0;
  std::uint32_t d_f = 2048;
  std::uint32_t d_c = 512;
  std::size_t n_sessions = 0;
  std::size_t runs_per_session = 12;
  std::size_t trials_per_run = 62;
  std::size_t repeats = 3;
  std::vector<double> decay_weights = {1.0, 0.6, 0.3, 0.1};
  double noise_sigma = 0.5;
  std::size_t captions_per_image = 1;
  std::uint64_t seed = 0;

  void validate() const;

  static GenConfig from_json_text(const std::string& text);
  std::string to_json_text() const;
};

// Fixed random mixing from embedding space to signal space.
struct MixingModel {
  Eigen::MatrixXd A;  // d_f x d_c
  std::vector<double> decay_weights;
  double noise_sigma = 0.0;
};

// session -> run -> trial -> image_id
using Schedule = std::vector<std::vector<std::vector<std::uint64_t>>>;

std::vector<ImageRecord> gen_concepts(const GenConfig& cfg);
Schedule gen_schedule(const GenConfig& cfg);
MixingModel make_mixing_model(const GenConfig& cfg);
Dataset gen_signals(const Schedule& schedule,
                    const std::vector<ImageRecord>& concepts,
                    const MixingModel& model, const GenConfig& cfg);

// One-call convenience: concepts + schedule + signals.
Dataset generate_dataset(const GenConfig& cfg);

// Ground-truth template for the retention analyses: the decay weights
// padded with zeros to max_k+1 entries.
std::vector<double> expected_retention_curve(const GenConfig& cfg,
                                             std::size_t max_k);

}  // namespace memtangle
