#include "memtangle/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <functional>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "memtangle/analysis.hpp"
#include "memtangle/decode.hpp"
#include "memtangle/errors.hpp"
#include "memtangle/prng.hpp"

namespace memtangle {

namespace {

using nlohmann::json;

constexpr const char* kArtifactVersion = "0.1.0";

TrainConfig train_cfg_from_json(const json& j) {
  TrainConfig cfg;
  if (j.contains("alpha")) cfg.alpha = j["alpha"].get<double>();
  if (j.contains("tau")) cfg.tau = j["tau"].get<double>();
  if (j.contains("lr")) cfg.lr = j["lr"].get<double>();
  if (j.contains("weight_decay")) cfg.weight_decay = j["weight_decay"].get<double>();
  if (j.contains("beta1")) cfg.beta1 = j["beta1"].get<double>();
  if (j.contains("beta2")) cfg.beta2 = j["beta2"].get<double>();
  if (j.contains("eps")) cfg.eps = j["eps"].get<double>();
  if (j.contains("epochs")) cfg.epochs = j["epochs"].get<std::size_t>();
  if (j.contains("batch_size")) cfg.batch_size = j["batch_size"].get<std::size_t>();
  if (j.contains("d_h")) cfg.d_h = j["d_h"].get<std::size_t>();
  if (j.contains("hidden")) cfg.hidden = j["hidden"].get<std::size_t>();
  return cfg;
}

json train_cfg_to_json(const TrainConfig& cfg) {
  return json{{"alpha", cfg.alpha},       {"tau", cfg.tau},
              {"lr", cfg.lr},             {"weight_decay", cfg.weight_decay},
              {"beta1", cfg.beta1},       {"beta2", cfg.beta2},
              {"eps", cfg.eps},           {"epochs", cfg.epochs},
              {"batch_size", cfg.batch_size}, {"d_h", cfg.d_h},
              {"hidden", cfg.hidden}};
}

std::string alpha_tag(double alpha) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", alpha);
  return buf;
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// Carve a seeded validation set of size m out of the train windows.
std::pair<std::vector<WindowSample>, std::vector<WindowSample>>
carve_validation(std::vector<WindowSample> train, std::size_t m,
                 std::uint64_t seed) {
  if (train.size() <= m)
    throw DataError("validation carve: train set of " +
                    std::to_string(train.size()) +
                    " windows cannot spare m=" + std::to_string(m));
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Pcg32 rng(seed, "validation");
  rng.shuffle(order);
  std::vector<bool> is_val(train.size(), false);
  for (std::size_t i = 0; i < m; ++i) is_val[order[i]] = true;
  std::vector<WindowSample> val, rest;
  val.reserve(m);
  rest.reserve(train.size() - m);
  for (std::size_t i = 0; i < train.size(); ++i)
    (is_val[i] ? val : rest).push_back(std::move(train[i]));
  return {std::move(rest), std::move(val)};
}

template <typename F>
void run_stage(const std::string& name, F&& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    throw ConfigError("stage " + name + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError("stage " + name + ": " + e.what());
  } catch (const NumericError& e) {
    throw NumericError("stage " + name + ": " + e.what());
  } catch (const IncompleteInputError& e) {
    throw IncompleteInputError("stage " + name + ": " + e.what());
  }
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
      .count();
}

// Run fn(i) for i in [0, n) on up to thread_cap() worker threads; the
// first failure (lowest index) is rethrown after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  std::size_t workers = std::min(thread_cap(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

void PipelineConfig::validate() const {
  gen.validate();
  train.validate();
  if (lambda < 0.0) throw ConfigError("PipelineConfig: lambda must be >= 0");
  if (m == 0) throw ConfigError("PipelineConfig: m must be positive");
  if (seeds.empty()) throw ConfigError("PipelineConfig: at least one seed");
  if (alphas.empty()) throw ConfigError("PipelineConfig: at least one alpha");
  for (double a : alphas)
    if (a < 0.0) throw ConfigError("PipelineConfig: alphas must be >= 0");
}

PipelineConfig PipelineConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("PipelineConfig: bad JSON: ") + e.what());
  }
  PipelineConfig cfg;
  try {
    cfg.gen = GenConfig::from_json_text(j.at("gen").dump());
    if (j.contains("analysis")) {
      const auto& a = j["analysis"];
      if (a.contains("lambda")) cfg.lambda = a["lambda"].get<double>();
      if (a.contains("max_k")) cfg.analysis_max_k = a["max_k"].get<std::size_t>();
    }
    if (j.contains("split") && j["split"].contains("m"))
      cfg.m = j["split"]["m"].get<std::size_t>();
    if (j.contains("train")) cfg.train = train_cfg_from_json(j["train"]);
    if (j.contains("alphas")) cfg.alphas = j["alphas"].get<std::vector<double>>();
    if (j.contains("seeds"))
      cfg.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("PipelineConfig: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

std::string PipelineConfig::to_json_text() const {
  json j;
  j["gen"] = json::parse(gen.to_json_text());
  j["analysis"] = {{"lambda", lambda}, {"max_k", analysis_max_k}};
  j["split"] = {{"m", m}};
  j["train"] = train_cfg_to_json(train);
  j["alphas"] = alphas;
  j["seeds"] = seeds;
  return j.dump(2);
}

std::uint64_t fnv1a64_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::uint64_t h = 1469598103934665603ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
    if (!in) break;
  }
  return h;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  if (in.bad()) throw DataError("read failed for " + path.string());
  return text;
}

void write_text_file_atomic(const std::filesystem::path& path,
                            const std::string& text) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open " + tmp.string() + " for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.flush();
    if (!out) throw DataError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::size_t thread_cap() {
  const char* env = std::getenv("MEMTANGLE_THREADS");
  if (!env || !*env) return 1;
  char* end = nullptr;
  long v = std::strtol(env, &end, 10);
  if (!end || *end != '\0' || v < 1)
    throw ConfigError("MEMTANGLE_THREADS must be a positive integer, got '" +
                      std::string(env) + "'");
  return static_cast<std::size_t>(v);
}

std::string checkpoint_name(const std::string& method, double alpha,
                            std::uint64_t seed) {
  return "ckpt_" + method + "_a" + alpha_tag(alpha) + "_s" +
         std::to_string(seed) + ".mdmw";
}

std::string decoded_name(const std::string& method, double alpha,
                         std::uint64_t seed) {
  return "decoded_" + method + "_a" + alpha_tag(alpha) + "_s" +
         std::to_string(seed) + ".jsonl";
}

void cmd_generate(const std::filesystem::path& config_path,
                  const std::filesystem::path& out_path) {
  auto start = std::chrono::steady_clock::now();
  GenConfig cfg = GenConfig::from_json_text(read_text_file(config_path));
  Dataset dataset = generate_dataset(cfg);
  save_dataset(dataset, out_path);

  json manifest;
  manifest["version"] = kArtifactVersion;
  manifest["config"] = json::parse(cfg.to_json_text());
  manifest["dataset"] = out_path.string();
  manifest["dataset_fnv1a64"] = hex64(fnv1a64_file(out_path));
  manifest["seconds"] = seconds_since(start);
  std::filesystem::path manifest_path = out_path;
  manifest_path += ".manifest.json";
  write_text_file_atomic(manifest_path, manifest.dump(2) + "\n");
}

void cmd_analyze(const std::filesystem::path& dataset_path,
                 const AnalyzeOptions& opts,
                 const std::filesystem::path& out_csv,
                 const std::filesystem::path& out_json) {
  Dataset dataset = load_dataset(dataset_path);
  json summary;
  summary["mode"] = opts.mode;
  summary["max_k"] = opts.max_k;
  std::string csv;
  if (opts.mode == "ridge") {
    RidgeConfig rcfg{opts.lambda, opts.max_k};
    SplitConfig split{opts.m, opts.seed};
    auto curve = ridge_offset_analysis(dataset, rcfg, split);
    double baseline = ridge_random_baseline(dataset, rcfg, split);
    csv = ridge_curve_csv(curve, baseline);
    json jc = json::array();
    for (const auto& pt : curve)
      jc.push_back({{"k", pt.k}, {"score", pt.score}});
    summary["curve"] = jc;
    summary["baseline"] = baseline;
    summary["lambda"] = opts.lambda;
    summary["m"] = opts.m;
    summary["seed"] = opts.seed;
  } else if (opts.mode == "rsa" || opts.mode == "auto-rsa") {
    RsaResult result = opts.mode == "rsa"
                           ? rsa_over_sessions(dataset, opts.max_k)
                           : fmri_auto_rsa(dataset, opts.max_k);
    csv = rsa_curve_csv(result);
    json jc = json::array();
    for (std::size_t i = 0; i < result.ks.size(); ++i)
      jc.push_back({{"k", result.ks[i]}, {"rho_ave", result.per_k[i]}});
    summary["curve"] = jc;
  } else {
    throw ConfigError("analyze: unknown mode '" + opts.mode +
                      "' (expected ridge, rsa, or auto-rsa)");
  }
  write_text_file_atomic(out_csv, csv);
  write_text_file_atomic(out_json, summary.dump(2) + "\n");
}

namespace {

void train_one(const Dataset& dataset, const std::vector<WindowSample>& windows,
               const TrainOptions& opts, std::uint64_t seed,
               const std::filesystem::path& out_dir) {
  TrainConfig cfg = opts.base;
  cfg.seed = seed;
  cfg.alpha = opts.alpha;
  auto [train, test] = split_contamination_free(windows, {opts.m, seed});
  (void)test;
  auto [train_rest, val] = carve_validation(std::move(train), opts.m, seed);

  TrainResult result;
  if (opts.method == "sf") {
    result = train_straightforward(train_rest, cfg, &val);
  } else if (opts.method == "dis") {
    result = train_disentangled(train_rest, cfg, &val);
  } else {
    throw ConfigError("train: unknown method '" + opts.method +
                      "' (expected sf or dis)");
  }
  save_checkpoint(out_dir / checkpoint_name(opts.method, opts.alpha, seed),
                  result.model, cfg, dataset.d_f, dataset.d_c);
  write_text_file_atomic(out_dir / ("trace_" + opts.method + "_a" +
                                    alpha_tag(opts.alpha) + "_s" +
                                    std::to_string(seed) + ".csv"),
                         trace_csv(result.trace));
}

}  // namespace

void cmd_train(const std::filesystem::path& dataset_path,
               const TrainOptions& opts, const std::filesystem::path& out_dir) {
  if (opts.seeds.empty()) throw ConfigError("train: at least one seed required");
  if (opts.method != "sf" && opts.method != "dis")
    throw ConfigError("train: unknown method '" + opts.method +
                      "' (expected sf or dis)");
  opts.base.validate();
  Dataset dataset = load_dataset(dataset_path);
  std::vector<WindowSample> windows = build_windows(dataset);
  std::filesystem::create_directories(out_dir);
  parallel_for(opts.seeds.size(), [&](std::size_t i) {
    train_one(dataset, windows, opts, opts.seeds[i], out_dir);
  });
}

void cmd_decode(const std::filesystem::path& checkpoint_path,
                const std::filesystem::path& dataset_path, std::uint64_t seed,
                std::size_t m, const std::filesystem::path& out_jsonl) {
  Checkpoint ckpt = load_checkpoint(checkpoint_path);
  Dataset dataset = load_dataset(dataset_path);
  if (ckpt.d_f != dataset.d_f || ckpt.d_c != dataset.d_c)
    throw DataError("decode: checkpoint dims (d_f=" + std::to_string(ckpt.d_f) +
                    ", d_c=" + std::to_string(ckpt.d_c) +
                    ") do not match dataset (d_f=" + std::to_string(dataset.d_f) +
                    ", d_c=" + std::to_string(dataset.d_c) + ")");
  std::vector<WindowSample> windows = build_windows(dataset);
  auto [train, test] = split_contamination_free(windows, {m, seed});
  CaptionBank bank = build_bank(dataset, train);
  auto index = dataset.image_index();

  std::vector<DecodedRecord> records;
  records.reserve(test.size() * 3);
  for (const auto& w : test) {
    auto preds = std::visit(
        [&](const auto& model) { return predict_offsets(model, w.fmri_t); },
        ckpt.model);
    auto rets = decode_window(preds, bank);
    for (std::size_t k = 0; k < 3; ++k) {
      DecodedRecord r;
      r.session_index = w.session_index;
      r.run_index = w.run_index;
      r.anchor = w.trial_index;
      r.k = k;
      r.predicted_caption = rets[k].caption;
      r.retrieved_image_id = rets[k].image_id;
      r.similarity = rets[k].similarity;
      r.true_image_id = w.target_image_ids[k];
      auto it = index.find(r.true_image_id);
      if (it == index.end())
        throw DataError("decode: window references unknown image " +
                        std::to_string(r.true_image_id));
      r.true_captions = dataset.images[it->second].captions;
      records.push_back(std::move(r));
    }
  }
  write_text_file_atomic(out_jsonl, decoded_jsonl(records));
}

std::vector<SeedScores> score_decoded(const std::vector<EvalInput>& inputs) {
  if (inputs.empty()) throw IncompleteInputError("evaluate: no inputs");
  std::vector<SeedScores> scores;
  for (const auto& input : inputs) {
    auto records = parse_decoded_jsonl(read_text_file(input.path));
    if (records.empty())
      throw IncompleteInputError("evaluate: " + input.path.string() +
                                 " has no records");
    for (std::size_t k = 0; k < 3; ++k) {
      std::vector<std::string> candidates;
      std::vector<std::vector<std::string>> references;
      double hits = 0.0, meteor_sum = 0.0;
      for (const auto& r : records) {
        if (r.k != k) continue;
        candidates.push_back(r.predicted_caption);
        references.push_back(r.true_captions);
        if (r.retrieved_image_id == r.true_image_id) hits += 1.0;
        meteor_sum += meteor_lite(r.predicted_caption, r.true_captions);
      }
      if (candidates.empty())
        throw IncompleteInputError("evaluate: " + input.path.string() +
                                   " has no records for k=" + std::to_string(k));
      SeedScores s;
      s.method = input.method;
      s.alpha = input.alpha;
      s.k = k;
      s.seed = input.seed;
      double n = static_cast<double>(candidates.size());
      s.values["cider"] = cider(candidates, references);
      s.values["meteor_lite"] = meteor_sum / n;
      s.values["top1"] = hits / n;
      scores.push_back(std::move(s));
    }
  }
  return scores;
}

void cmd_evaluate(const std::vector<EvalInput>& inputs,
                  const std::filesystem::path& out_csv,
                  const std::filesystem::path& out_table) {
  MetricReport report = aggregate_scores(score_decoded(inputs));
  write_text_file_atomic(out_csv, report_csv(report));
  write_text_file_atomic(out_table, report_table(report));
}

void cmd_pipeline(const std::filesystem::path& config_path,
                  const std::filesystem::path& out_dir) {
  auto run_start = std::chrono::steady_clock::now();
  PipelineConfig cfg = PipelineConfig::from_json_text(read_text_file(config_path));
  std::filesystem::create_directories(out_dir);
  json timings;

  std::filesystem::path dataset_path = out_dir / "dataset.mdst";
  run_stage("generate", [&] {
    auto t = std::chrono::steady_clock::now();
    save_dataset(generate_dataset(cfg.gen), dataset_path);
    timings["generate"] = seconds_since(t);
  });

  run_stage("analyze", [&] {
    auto t = std::chrono::steady_clock::now();
    AnalyzeOptions opts;
    opts.max_k = cfg.analysis_max_k;
    opts.lambda = cfg.lambda;
    opts.seed = cfg.seeds.front();
    opts.m = cfg.m;
    opts.mode = "ridge";
    cmd_analyze(dataset_path, opts, out_dir / "ridge.csv", out_dir / "ridge.json");
    opts.mode = "rsa";
    cmd_analyze(dataset_path, opts, out_dir / "rsa.csv", out_dir / "rsa.json");
    opts.mode = "auto-rsa";
    cmd_analyze(dataset_path, opts, out_dir / "auto_rsa.csv",
                out_dir / "auto_rsa.json");
    timings["analyze"] = seconds_since(t);
  });

  // Ablation grid: sf has no contrastive term; dis sweeps the alpha grid.
  std::vector<std::pair<std::string, double>> jobs;
  jobs.emplace_back("sf", 0.0);
  for (double a : cfg.alphas) jobs.emplace_back("dis", a);

  run_stage("train", [&] {
    auto t = std::chrono::steady_clock::now();
    for (const auto& [method, alpha] : jobs) {
      TrainOptions opts;
      opts.method = method;
      opts.alpha = alpha;
      opts.seeds = cfg.seeds;
      opts.base = cfg.train;
      opts.m = cfg.m;
      cmd_train(dataset_path, opts, out_dir);
    }
    timings["train"] = seconds_since(t);
  });

  run_stage("decode", [&] {
    auto t = std::chrono::steady_clock::now();
    for (const auto& [method, alpha] : jobs)
      parallel_for(cfg.seeds.size(), [&](std::size_t i) {
        std::uint64_t seed = cfg.seeds[i];
        cmd_decode(out_dir / checkpoint_name(method, alpha, seed), dataset_path,
                   seed, cfg.m, out_dir / decoded_name(method, alpha, seed));
      });
    timings["decode"] = seconds_since(t);
  });

  run_stage("evaluate", [&] {
    auto t = std::chrono::steady_clock::now();
    std::vector<EvalInput> inputs;
    for (const auto& [method, alpha] : jobs)
      for (std::uint64_t seed : cfg.seeds)
        inputs.push_back(
            {method, alpha, seed, out_dir / decoded_name(method, alpha, seed)});
    cmd_evaluate(inputs, out_dir / "report.csv", out_dir / "report.txt");
    timings["evaluate"] = seconds_since(t);
  });

  json manifest;
  manifest["version"] = kArtifactVersion;
  manifest["config"] = json::parse(cfg.to_json_text());
  manifest["dataset_fnv1a64"] = hex64(fnv1a64_file(dataset_path));
  manifest["seeds"] = cfg.seeds;
  std::vector<std::string> outputs;
  for (const auto& entry : std::filesystem::directory_iterator(out_dir))
    if (entry.is_regular_file() && entry.path().extension() != ".tmp")
      outputs.push_back(entry.path().filename().string());
  std::sort(outputs.begin(), outputs.end());
  manifest["outputs"] = outputs;
  manifest["timings_seconds"] = timings;
  manifest["total_seconds"] = seconds_since(run_start);
  write_text_file_atomic(out_dir / "manifest.json", manifest.dump(2) + "\n");
}

}  // namespace memtangle
