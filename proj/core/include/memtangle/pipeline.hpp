#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "memtangle/eval.hpp"
#include "memtangle/model.hpp"
#include "memtangle/synthgen.hpp"

namespace memtangle {

// Composite config for cmd_pipeline; individual commands take slices of it.
struct PipelineConfig {
  GenConfig gen;
  double lambda = 1.0;
  std::size_t analysis_max_k = 9;
  std::size_t m = 500;  // test-set size; validation carve is the same size
  TrainConfig train;
  std::vector<double> alphas = {0.0, 0.01, 0.1};
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};

  void validate() const;
  static PipelineConfig from_json_text(const std::string& text);
  std::string to_json_text() const;
};

std::uint64_t fnv1a64_file(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
// Atomic: writes to a temp file in the same directory, then renames.
void write_text_file_atomic(const std::filesystem::path& path,
                            const std::string& text);

// Number of parallel seed-jobs; MEMTANGLE_THREADS caps it (default 1).
std::size_t thread_cap();

void cmd_generate(const std::filesystem::path& config_path,
                  const std::filesystem::path& out_path);

struct AnalyzeOptions {
  std::string mode = "ridge";  // ridge | rsa | auto-rsa
  std::size_t max_k = 9;
  double lambda = 1.0;
  std::uint64_t seed = 0;
  std::size_t m = 500;
};
void cmd_analyze(const std::filesystem::path& dataset_path,
                 const AnalyzeOptions& opts,
                 const std::filesystem::path& out_csv,
                 const std::filesystem::path& out_json);

struct TrainOptions {
  std::string method = "dis";  // sf | dis
  double alpha = 0.01;
  std::vector<std::uint64_t> seeds = {1};
  TrainConfig base;
  std::size_t m = 500;
};
// One checkpoint + loss trace per seed, written under out_dir.
void cmd_train(const std::filesystem::path& dataset_path,
               const TrainOptions& opts, const std::filesystem::path& out_dir);

void cmd_decode(const std::filesystem::path& checkpoint_path,
                const std::filesystem::path& dataset_path, std::uint64_t seed,
                std::size_t m, const std::filesystem::path& out_jsonl);

struct EvalInput {
  std::string method;
  double alpha;
  std::uint64_t seed;
  std::filesystem::path path;
};
void cmd_evaluate(const std::vector<EvalInput>& inputs,
                  const std::filesystem::path& out_csv,
                  const std::filesystem::path& out_table);

void cmd_pipeline(const std::filesystem::path& config_path,
                  const std::filesystem::path& out_dir);

// Library-level pieces used by the commands (and tests).
std::string checkpoint_name(const std::string& method, double alpha,
                            std::uint64_t seed);
std::string decoded_name(const std::string& method, double alpha,
                         std::uint64_t seed);
std::vector<SeedScores> score_decoded(const std::vector<EvalInput>& inputs);

}  // namespace memtangle
