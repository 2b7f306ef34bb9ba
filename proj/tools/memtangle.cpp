// memtangle: synthetic memory-retention analyses and the disentangling
// task, end to end. Subcommands: generate, analyze, train, decode,
// evaluate, pipeline.

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "memtangle/errors.hpp"
#include "memtangle/pipeline.hpp"

namespace {

memtangle::EvalInput parse_eval_input(const std::string& spec) {
  // method:alpha:seed:path
  std::vector<std::string> parts;
  std::size_t start = 0;
  for (int i = 0; i < 3; ++i) {
    std::size_t colon = spec.find(':', start);
    if (colon == std::string::npos)
      throw memtangle::ConfigError(
          "evaluate: input must be method:alpha:seed:path, got '" + spec + "'");
    parts.push_back(spec.substr(start, colon - start));
    start = colon + 1;
  }
  parts.push_back(spec.substr(start));
  memtangle::EvalInput input;
  input.method = parts[0];
  try {
    input.alpha = std::stod(parts[1]);
    input.seed = std::stoull(parts[2]);
  } catch (const std::exception&) {
    throw memtangle::ConfigError("evaluate: bad alpha or seed in '" + spec + "'");
  }
  input.path = parts[3];
  return input;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"memtangle: memory-retention analysis and disentangling task"};
  app.require_subcommand(1);

  // generate
  std::string gen_config, gen_out = "dataset.mdst";
  auto* gen = app.add_subcommand("generate", "Generate a synthetic MDST dataset");
  gen->add_option("--config", gen_config, "GenConfig JSON file")->required();
  gen->add_option("--out", gen_out, "Output .mdst path");

  // analyze
  std::string ana_dataset, ana_mode = "ridge";
  std::string ana_csv = "curve.csv", ana_json = "summary.json";
  memtangle::AnalyzeOptions ana_opts;
  auto* ana = app.add_subcommand("analyze", "Ridge / RSA / auto-RSA curves");
  ana->add_option("--dataset", ana_dataset, "MDST dataset")->required();
  ana->add_option("--mode", ana_mode, "ridge | rsa | auto-rsa");
  ana->add_option("--max-k", ana_opts.max_k, "Maximum offset");
  ana->add_option("--lambda", ana_opts.lambda, "Ridge regularization");
  ana->add_option("--seed", ana_opts.seed, "Split seed (ridge mode)");
  ana->add_option("--m", ana_opts.m, "Test-set size (ridge mode)");
  ana->add_option("--out-csv", ana_csv, "Curve CSV path");
  ana->add_option("--out-json", ana_json, "JSON summary path");

  // train
  std::string trn_dataset, trn_out = ".";
  memtangle::TrainOptions trn_opts;
  auto* trn = app.add_subcommand("train", "Train decoders, one job per seed");
  trn->add_option("--dataset", trn_dataset, "MDST dataset")->required();
  trn->add_option("--method", trn_opts.method, "sf | dis");
  trn->add_option("--alpha", trn_opts.alpha, "Contrastive weight");
  trn->add_option("--seeds", trn_opts.seeds, "Split/training seeds")
      ->delimiter(',');
  trn->add_option("--m", trn_opts.m, "Test-set / validation size");
  trn->add_option("--epochs", trn_opts.base.epochs, "Training epochs");
  trn->add_option("--batch-size", trn_opts.base.batch_size, "Batch size");
  trn->add_option("--lr", trn_opts.base.lr, "Learning rate");
  trn->add_option("--weight-decay", trn_opts.base.weight_decay, "AdamW decay");
  trn->add_option("--tau", trn_opts.base.tau, "InfoNCE temperature");
  trn->add_option("--d-h", trn_opts.base.d_h, "Disentangled component width");
  trn->add_option("--hidden", trn_opts.base.hidden, "Hidden layer width");
  trn->add_option("--out-dir", trn_out, "Output directory");

  // decode
  std::string dec_ckpt, dec_dataset, dec_out = "decoded.jsonl";
  std::uint64_t dec_seed = 1;
  std::size_t dec_m = 500;
  auto* dec = app.add_subcommand("decode", "Decode test windows to captions");
  dec->add_option("--checkpoint", dec_ckpt, "MDMW checkpoint")->required();
  dec->add_option("--dataset", dec_dataset, "MDST dataset")->required();
  dec->add_option("--seed", dec_seed, "Split seed");
  dec->add_option("--m", dec_m, "Test-set size");
  dec->add_option("--out", dec_out, "Decoded JSONL path");

  // evaluate
  std::vector<std::string> eval_specs;
  std::string eval_csv = "report.csv", eval_table = "report.txt";
  auto* evl = app.add_subcommand("evaluate", "Aggregate decoded runs");
  evl->add_option("--input", eval_specs,
                  "Decoded run as method:alpha:seed:path (repeatable)")
      ->required();
  evl->add_option("--out-csv", eval_csv, "Report CSV path");
  evl->add_option("--out-table", eval_table, "Report table path");

  // pipeline
  std::string pipe_config, pipe_out = "run";
  auto* pipe = app.add_subcommand("pipeline", "Full generate-to-report run");
  pipe->add_option("--config", pipe_config, "PipelineConfig JSON")->required();
  pipe->add_option("--out-dir", pipe_out, "Run output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      memtangle::cmd_generate(gen_config, gen_out);
    } else if (ana->parsed()) {
      ana_opts.mode = ana_mode;
      memtangle::cmd_analyze(ana_dataset, ana_opts, ana_csv, ana_json);
    } else if (trn->parsed()) {
      memtangle::cmd_train(trn_dataset, trn_opts, trn_out);
    } else if (dec->parsed()) {
      memtangle::cmd_decode(dec_ckpt, dec_dataset, dec_seed, dec_m, dec_out);
    } else if (evl->parsed()) {
      std::vector<memtangle::EvalInput> inputs;
      for (const auto& spec : eval_specs)
        inputs.push_back(parse_eval_input(spec));
      memtangle::cmd_evaluate(inputs, eval_csv, eval_table);
    } else if (pipe->parsed()) {
      memtangle::cmd_pipeline(pipe_config, pipe_out);
    }
  } catch (const memtangle::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
