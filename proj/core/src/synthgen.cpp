#include "memtangle/synthgen.hpp"

#include <unordered_set>

#include <nlohmann/json.hpp>

#include "memtangle/errors.hpp"
#include "memtangle/prng.hpp"

namespace memtangle {

namespace {

using nlohmann::json;

const char* kAdjectives[] = {
    "red",    "blue",   "green",  "yellow", "small",  "large",
    "old",    "young",  "bright", "dark",   "quiet",  "noisy",
    "shiny",  "rusty",  "fluffy", "sleek",  "heavy",  "light",
    "wooden", "metal",  "striped", "spotted", "crooked", "round"};

const char* kNouns[] = {
    "fox",    "horse",  "bicycle", "lantern", "bridge", "kettle",
    "pigeon", "wagon",  "statue",  "barrel",  "turtle", "windmill",
    "canoe",  "ladder", "tractor", "teapot",  "falcon", "anchor",
    "drum",   "compass", "otter",  "beacon",  "plough", "marble"};

const char* kVerbPhrases[] = {
    "rests calmly",      "spins slowly",     "drifts sideways",
    "stands upright",    "leans forward",    "rolls gently",
    "glows faintly",     "sways softly",     "waits patiently",
    "turns quickly",     "settles quietly",  "balances carefully",
    "rattles loudly",    "floats steadily",  "tilts slightly",
    "shines warmly"};

const char* kLocationPhrases[] = {
    "near the harbor",   "beside the fence",  "under the archway",
    "on the hillside",   "by the old mill",   "inside the courtyard",
    "along the towpath", "behind the market", "at the crossroads",
    "above the valley",  "beneath the awning", "within the orchard",
    "past the orchard gate", "outside the depot", "around the fountain",
    "before the lighthouse"};

template <typename T, std::size_t N>
const T& pick(Pcg32& rng, const T (&arr)[N]) {
  return arr[rng.next_below(static_cast<std::uint32_t>(N))];
}

}  // namespace

void GenConfig::validate() const {
  if (n_images == 0 || n_sessions == 0 || runs_per_session == 0 ||
      trials_per_run == 0 || repeats == 0)
    throw ConfigError("GenConfig: counts must be positive");
  if (d_f == 0 || d_c == 0) throw ConfigError("GenConfig: d_f and d_c must be positive");
  std::size_t slots = n_sessions * runs_per_session * trials_per_run;
  if (repeats * n_images != slots)
    throw ConfigError(
        "GenConfig: schedule must exactly fill: repeats*n_images = " +
        std::to_string(repeats * n_images) +
        " but n_sessions*runs_per_session*trials_per_run = " +
        std::to_string(slots));
  if (decay_weights.empty() || decay_weights[0] <= 0.0)
    throw ConfigError("GenConfig: decay_weights[0] must be > 0");
  for (double w : decay_weights)
    if (w < 0.0) throw ConfigError("GenConfig: decay_weights must be non-negative");
  if (noise_sigma < 0.0) throw ConfigError("GenConfig: noise_sigma must be >= 0");
  if (captions_per_image == 0 || captions_per_image > 5)
    throw ConfigError("GenConfig: captions_per_image must be in 1..5");
}

GenConfig GenConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("GenConfig: bad JSON: ") + e.what());
  }
  GenConfig cfg;
  try {
    cfg.n_images = j.at("n_images").get<std::size_t>();
    cfg.n_sessions = j.at("n_sessions").get<std::size_t>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("d_f")) cfg.d_f = j["d_f"].get<std::uint32_t>();
    if (j.contains("d_c")) cfg.d_c = j["d_c"].get<std::uint32_t>();
    if (j.contains("runs_per_session"))
      cfg.runs_per_session = j["runs_per_session"].get<std::size_t>();
    if (j.contains("trials_per_run"))
      cfg.trials_per_run = j["trials_per_run"].get<std::size_t>();
    if (j.contains("repeats")) cfg.repeats = j["repeats"].get<std::size_t>();
    if (j.contains("decay_weights"))
      cfg.decay_weights = j["decay_weights"].get<std::vector<double>>();
    if (j.contains("noise_sigma")) cfg.noise_sigma = j["noise_sigma"].get<double>();
    if (j.contains("captions_per_image"))
      cfg.captions_per_image = j["captions_per_image"].get<std::size_t>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("GenConfig: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

std::string GenConfig::to_json_text() const {
  json j;
  j["n_images"] = n_images;
  j["d_f"] = d_f;
  j["d_c"] = d_c;
  j["n_sessions"] = n_sessions;
  j["runs_per_session"] = runs_per_session;
  j["trials_per_run"] = trials_per_run;
  j["repeats"] = repeats;
  j["decay_weights"] = decay_weights;
  j["noise_sigma"] = noise_sigma;
  j["captions_per_image"] = captions_per_image;
  j["seed"] = seed;
  return j.dump(2);
}

std::vector<ImageRecord> gen_concepts(const GenConfig& cfg) {
  cfg.validate();
  Pcg32 emb_rng(cfg.seed, "concepts");
  Pcg32 cap_rng(cfg.seed, "captions");
  std::vector<ImageRecord> records;
  records.reserve(cfg.n_images);
  std::unordered_set<std::string> seen_captions;
  for (std::size_t i = 0; i < cfg.n_images; ++i) {
    ImageRecord rec;
    rec.image_id = i;
    rec.embedding.resize(cfg.d_c);
    double norm2 = 0.0;
    std::vector<double> raw(cfg.d_c);
    for (auto& x : raw) {
      x = emb_rng.next_gaussian();
      norm2 += x * x;
    }
    double inv = 1.0 / std::sqrt(norm2);
    for (std::size_t d = 0; d < cfg.d_c; ++d)
      rec.embedding[d] = static_cast<float>(raw[d] * inv);

    for (std::size_t c = 0; c < cfg.captions_per_image; ++c) {
      std::string caption;
      do {
        caption = std::string("a ") + pick(cap_rng, kAdjectives) + " " +
                  pick(cap_rng, kNouns) + " " + pick(cap_rng, kVerbPhrases) +
                  " " + pick(cap_rng, kLocationPhrases);
      } while (!seen_captions.insert(caption).second);
      rec.captions.push_back(std::move(caption));
    }
    records.push_back(std::move(rec));
  }
  return records;
}

Schedule gen_schedule(const GenConfig& cfg) {
  cfg.validate();
  std::vector<std::uint64_t> slots;
  slots.reserve(cfg.repeats * cfg.n_images);
  for (std::size_t i = 0; i < cfg.n_images; ++i)
    for (std::size_t r = 0; r < cfg.repeats; ++r) slots.push_back(i);
  Pcg32 rng(cfg.seed, "schedule");
  rng.shuffle(slots);

  Schedule schedule(cfg.n_sessions);
  std::size_t pos = 0;
  for (auto& session : schedule) {
    session.resize(cfg.runs_per_session);
    for (auto& run : session) {
      run.assign(slots.begin() + pos, slots.begin() + pos + cfg.trials_per_run);
      pos += cfg.trials_per_run;
    }
  }
  return schedule;
}

MixingModel make_mixing_model(const GenConfig& cfg) {
  MixingModel model;
  model.decay_weights = cfg.decay_weights;
  model.noise_sigma = cfg.noise_sigma;
  Pcg32 rng(cfg.seed, "mixing");
  model.A.resize(cfg.d_f, cfg.d_c);
  // Row-major fill so the stream order is documented: voxel by voxel.
  for (std::uint32_t i = 0; i < cfg.d_f; ++i)
    for (std::uint32_t j = 0; j < cfg.d_c; ++j)
      model.A(i, j) = rng.next_gaussian();
  return model;
}

Dataset gen_signals(const Schedule& schedule,
                    const std::vector<ImageRecord>& concepts,
                    const MixingModel& model, const GenConfig& cfg) {
  if (model.A.rows() != cfg.d_f || model.A.cols() != cfg.d_c)
    throw DataError("gen_signals: mixing matrix shape mismatch");
  Dataset dataset;
  dataset.d_f = cfg.d_f;
  dataset.d_c = cfg.d_c;
  dataset.images = concepts;

  Pcg32 noise_rng(cfg.seed, "noise");
  dataset.sessions.resize(schedule.size());
  for (std::size_t s = 0; s < schedule.size(); ++s) {
    dataset.sessions[s].resize(schedule[s].size());
    for (std::size_t r = 0; r < schedule[s].size(); ++r) {
      const auto& run_ids = schedule[s][r];
      Run& run = dataset.sessions[s][r];
      run.resize(run_ids.size());
      for (std::size_t t = 0; t < run_ids.size(); ++t) {
        std::uint64_t id = run_ids[t];
        if (id >= concepts.size())
          throw DataError("gen_signals: schedule references image " +
                          std::to_string(id) + " outside concept table");
        // Memory resets at run boundaries: past terms before the run
        // start are dropped.
        Eigen::VectorXd mix = Eigen::VectorXd::Zero(cfg.d_c);
        for (std::size_t k = 0; k < model.decay_weights.size() && k <= t; ++k) {
          const auto& emb = concepts[run_ids[t - k]].embedding;
          for (std::uint32_t d = 0; d < cfg.d_c; ++d)
            mix[d] += model.decay_weights[k] * emb[d];
        }
        Eigen::VectorXd f = model.A * mix;
        Trial& trial = run[t];
        trial.session_index = static_cast<std::uint32_t>(s);
        trial.run_index = static_cast<std::uint32_t>(r);
        trial.trial_index = static_cast<std::uint32_t>(t);
        trial.image_id = id;
        trial.fmri.resize(cfg.d_f);
        for (std::uint32_t d = 0; d < cfg.d_f; ++d)
          trial.fmri[d] = static_cast<float>(
              f[d] + model.noise_sigma * noise_rng.next_gaussian());
      }
    }
  }
  dataset.validate();
  return dataset;
}

Dataset generate_dataset(const GenConfig& cfg) {
  auto concepts = gen_concepts(cfg);
  auto schedule = gen_schedule(cfg);
  auto model = make_mixing_model(cfg);
  return gen_signals(schedule, concepts, model, cfg);
}

std::vector<double> expected_retention_curve(const GenConfig& cfg,
                                             std::size_t max_k) {
  cfg.validate();
  std::vector<double> curve(max_k + 1, 0.0);
  for (std::size_t k = 0; k <= max_k && k < cfg.decay_weights.size(); ++k)
    curve[k] = cfg.decay_weights[k];
  return curve;
}

}  // namespace memtangle
