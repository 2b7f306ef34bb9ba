#include "memtangle/dataset.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_set>

#include "memtangle/errors.hpp"
#include "memtangle/prng.hpp"

namespace memtangle {

namespace {

bool all_whitespace(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r';
  });
}

}  // namespace

void Dataset::validate() const {
  if (d_f == 0 || d_c == 0)
    throw ConfigError("dataset: d_f and d_c must be positive");
  auto index = image_index();
  if (index.size() != images.size())
    throw DataError("dataset: duplicate image_id in image table");
  for (const auto& img : images) {
    if (img.embedding.size() != d_c)
      throw DataError("dataset: image " + std::to_string(img.image_id) +
                      " embedding length " + std::to_string(img.embedding.size()) +
                      " != d_c " + std::to_string(d_c));
    if (img.captions.empty() || img.captions.size() > 5)
      throw DataError("dataset: image " + std::to_string(img.image_id) +
                      " must carry 1..5 captions");
    for (const auto& cap : img.captions)
      if (cap.empty() || all_whitespace(cap))
        throw DataError("dataset: image " + std::to_string(img.image_id) +
                        " has an empty caption");
  }
  for (std::size_t s = 0; s < sessions.size(); ++s) {
    for (std::size_t r = 0; r < sessions[s].size(); ++r) {
      const Run& run = sessions[s][r];
      for (std::size_t t = 0; t < run.size(); ++t) {
        const Trial& trial = run[t];
        std::string where = "session " + std::to_string(s) + " run " +
                            std::to_string(r) + " trial " + std::to_string(t);
        if (trial.session_index != s || trial.run_index != r ||
            trial.trial_index != t)
          throw DataError("dataset: inconsistent indices at " + where);
        if (trial.fmri.size() != d_f)
          throw DataError("dataset: fmri length mismatch at " + where);
        if (!index.contains(trial.image_id))
          throw DataError("dataset: dangling image_id " +
                          std::to_string(trial.image_id) + " at " + where);
      }
    }
  }
}

std::unordered_map<std::uint64_t, std::size_t> Dataset::image_index() const {
  std::unordered_map<std::uint64_t, std::size_t> index;
  index.reserve(images.size());
  for (std::size_t i = 0; i < images.size(); ++i)
    index.emplace(images[i].image_id, i);
  return index;
}

std::size_t Dataset::trial_count() const {
  std::size_t n = 0;
  for (const auto& session : sessions)
    for (const auto& run : session) n += run.size();
  return n;
}

std::vector<WindowSample> build_windows(const Dataset& dataset, int window) {
  if (window < 2) throw ConfigError("build_windows: window must be >= 2");
  dataset.validate();
  auto index = dataset.image_index();
  std::vector<WindowSample> out;
  const auto w = static_cast<std::size_t>(window);
  for (const auto& session : dataset.sessions) {
    for (const Run& run : session) {
      if (run.size() < w) continue;
      for (std::size_t t = w - 1; t < run.size(); ++t) {
        const Trial& anchor = run[t];
        WindowSample sample;
        sample.session_index = anchor.session_index;
        sample.run_index = anchor.run_index;
        sample.trial_index = anchor.trial_index;
        sample.fmri_t = anchor.fmri;
        sample.fmri_prev = run[t - 1].fmri;
        sample.target_image_ids.reserve(w);
        sample.target_embeddings.reserve(w);
        for (std::size_t i = 0; i < w; ++i) {
          const Trial& past = run[t - i];
          sample.target_image_ids.push_back(past.image_id);
          sample.target_embeddings.push_back(
              dataset.images[index.at(past.image_id)].embedding);
        }
        out.push_back(std::move(sample));
      }
    }
  }
  return out;
}

std::pair<std::vector<WindowSample>, std::vector<WindowSample>>
split_contamination_free(const std::vector<WindowSample>& windows,
                         const SplitConfig& cfg) {
  if (windows.empty())
    throw ConfigError("split_contamination_free: no windows");
  if (cfg.m == 0 || cfg.m >= windows.size())
    throw ConfigError("split_contamination_free: m=" + std::to_string(cfg.m) +
                      " must be in [1, window count " +
                      std::to_string(windows.size()) + ")");

  // Pre-sort by (session, run, trial) so the draw does not depend on the
  // caller's ordering.
  std::vector<std::size_t> order(windows.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& wa = windows[a];
    const auto& wb = windows[b];
    return std::tie(wa.session_index, wa.run_index, wa.trial_index) <
           std::tie(wb.session_index, wb.run_index, wb.trial_index);
  });

  Pcg32 rng(cfg.seed, "split");
  rng.shuffle(order);

  std::vector<WindowSample> test;
  test.reserve(cfg.m);
  std::unordered_set<std::uint64_t> marked;
  for (std::size_t i = 0; i < cfg.m; ++i) {
    const WindowSample& w = windows[order[i]];
    marked.insert(w.target_image_ids.begin(), w.target_image_ids.end());
    test.push_back(w);
  }

  std::vector<WindowSample> train;
  for (std::size_t i = cfg.m; i < order.size(); ++i) {
    const WindowSample& w = windows[order[i]];
    bool contaminated = std::any_of(
        w.target_image_ids.begin(), w.target_image_ids.end(),
        [&](std::uint64_t id) { return marked.contains(id); });
    if (!contaminated) train.push_back(w);
  }
  if (train.empty())
    throw DataError("split_contamination_free: over-contaminated split "
                    "(every remaining window shares an image with the test set)");

  auto by_anchor = [](const WindowSample& a, const WindowSample& b) {
    return std::tie(a.session_index, a.run_index, a.trial_index) <
           std::tie(b.session_index, b.run_index, b.trial_index);
  };
  std::sort(train.begin(), train.end(), by_anchor);
  std::sort(test.begin(), test.end(), by_anchor);
  return {std::move(train), std::move(test)};
}

}  // namespace memtangle
