#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace memtangle {

// One stimulus: identity, semantic embedding, reference caption(s).
struct ImageRecord {
  std::uint64_t image_id = 0;
  std::vector<float> embedding;        // length d_c
  std::vector<std::string> captions;   // 1..5 non-empty UTF-8 strings

  bool operator==(const ImageRecord&) const = default;
};

struct Trial {
  std::uint32_t session_index = 0;
  std::uint32_t run_index = 0;
  std::uint32_t trial_index = 0;  // consecutive from 0 within the run
  std::uint64_t image_id = 0;
  std::vector<float> fmri;        // length d_f

  bool operator==(const Trial&) const = default;
};

using Run = std::vector<Trial>;
using Session = std::vector<Run>;

struct Dataset {
  std::uint32_t d_f = 0;
  std::uint32_t d_c = 0;
  std::vector<ImageRecord> images;
  std::vector<Session> sessions;

  bool operator==(const Dataset&) const = default;

  // Structural validation: dimensions, consecutive trial indices,
  // caption constraints, no dangling image references.
  void validate() const;

  // image_id -> index into images.
  std::unordered_map<std::uint64_t, std::size_t> image_index() const;

  std::size_t trial_count() const;
};

// One task instance <F_t; C_t, C_{t-1}, C_{t-2}> plus the previous-trial
// signal for contrastive training. All trials of a window share one run.
struct WindowSample {
  std::uint32_t session_index = 0;
  std::uint32_t run_index = 0;
  std::uint32_t trial_index = 0;  // anchor trial t
  std::vector<float> fmri_t;
  std::vector<float> fmri_prev;
  std::vector<std::uint64_t> target_image_ids;          // [t, t-1, t-2]
  std::vector<std::vector<float>> target_embeddings;    // [C_t, C_{t-1}, C_{t-2}]

  bool operator==(const WindowSample&) const = default;
};

struct SplitConfig {
  std::size_t m = 500;     // test-set size
  std::uint64_t seed = 0;
};

// Sliding window over each run; windows never cross run boundaries.
std::vector<WindowSample> build_windows(const Dataset& dataset, int window = 3);

// Contamination-free split: m test windows drawn uniformly without
// replacement (seeded Fisher-Yates), then every remaining window that
// shares any image with the test set is discarded.
std::pair<std::vector<WindowSample>, std::vector<WindowSample>>
split_contamination_free(const std::vector<WindowSample>& windows,
                         const SplitConfig& cfg);

// MDST on-disk format (little-endian, see README).
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

bool is_valid_utf8(std::string_view s);

}  // namespace memtangle
