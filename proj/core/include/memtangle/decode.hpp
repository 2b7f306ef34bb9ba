#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "memtangle/dataset.hpp"

namespace memtangle {

// Nearest-neighbor retrieval bank; the caption store for decoding
// predicted embeddings back to text.
struct CaptionBank {
  struct Entry {
    std::uint64_t image_id;
    Eigen::VectorXd embedding;  // length d_c
    std::string caption;
  };
  std::vector<Entry> entries;
};

// One entry per distinct train-side image (first caption wins); test-set
// images never enter the bank.
CaptionBank build_bank(const Dataset& dataset,
                       const std::vector<WindowSample>& train_windows);

struct Retrieval {
  std::string caption;
  std::uint64_t image_id;
  double similarity;
};

// Exact linear scan maximizing cosine similarity; ties go to the lowest
// image_id.
Retrieval nearest_caption(const Eigen::VectorXd& pred, const CaptionBank& bank);

std::array<Retrieval, 3> decode_window(
    const std::array<Eigen::VectorXd, 3>& preds, const CaptionBank& bank);

struct DecodedRecord {
  std::uint32_t session_index;
  std::uint32_t run_index;
  std::uint32_t anchor;  // trial index t
  std::size_t k;
  std::string predicted_caption;
  std::vector<std::string> true_captions;
  std::uint64_t retrieved_image_id;
  std::uint64_t true_image_id;
  double similarity;
};

// One JSON object per line:
// {anchor, k, predicted_caption, true_captions, retrieved_image_id, ...}
std::string decoded_jsonl(const std::vector<DecodedRecord>& records);
std::vector<DecodedRecord> parse_decoded_jsonl(const std::string& text);

}  // namespace memtangle
