#pragma once

#include <string>
#include <vector>

#include "memtangle/dataset.hpp"
#include "memtangle/prng.hpp"

namespace testutil {

// Hand-rolled dataset with deterministic non-constant vectors; the
// schedule is sessions -> runs -> image_ids.
inline memtangle::Dataset make_dataset(
    std::uint32_t d_f, std::uint32_t d_c,
    const std::vector<std::vector<std::vector<std::uint64_t>>>& schedule,
    std::size_t n_images) {
  memtangle::Dataset ds;
  ds.d_f = d_f;
  ds.d_c = d_c;
  memtangle::Pcg32 rng(99, "noise");
  for (std::size_t i = 0; i < n_images; ++i) {
    memtangle::ImageRecord rec;
    rec.image_id = i;
    rec.embedding.resize(d_c);
    for (auto& x : rec.embedding) x = static_cast<float>(rng.next_gaussian());
    rec.captions = {"a test image number " + std::to_string(i)};
    ds.images.push_back(std::move(rec));
  }
  for (std::size_t s = 0; s < schedule.size(); ++s) {
    memtangle::Session session;
    for (std::size_t r = 0; r < schedule[s].size(); ++r) {
      memtangle::Run run;
      for (std::size_t t = 0; t < schedule[s][r].size(); ++t) {
        memtangle::Trial trial;
        trial.session_index = static_cast<std::uint32_t>(s);
        trial.run_index = static_cast<std::uint32_t>(r);
        trial.trial_index = static_cast<std::uint32_t>(t);
        trial.image_id = schedule[s][r][t];
        trial.fmri.resize(d_f);
        for (auto& x : trial.fmri) x = static_cast<float>(rng.next_gaussian());
        run.push_back(std::move(trial));
      }
      session.push_back(std::move(run));
    }
    ds.sessions.push_back(std::move(session));
  }
  return ds;
}

// One session, one run over images 0..n-1 in order.
inline memtangle::Dataset sequential_dataset(std::uint32_t d_f, std::uint32_t d_c,
                                             std::size_t n_trials) {
  std::vector<std::uint64_t> run(n_trials);
  for (std::size_t i = 0; i < n_trials; ++i) run[i] = i;
  return make_dataset(d_f, d_c, {{run}}, n_trials);
}

}  // namespace testutil
