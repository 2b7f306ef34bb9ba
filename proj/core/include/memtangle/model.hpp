#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "memtangle/dataset.hpp"

namespace memtangle {

// Affine layer; ReLU is applied between layers, identity after the last.
struct LinearLayer {
  Eigen::MatrixXd W;  // out x in
  Eigen::VectorXd b;  // out
};

struct Mlp {
  std::vector<LinearLayer> layers;

  std::size_t input_width() const { return layers.front().W.cols(); }
  std::size_t output_width() const { return layers.back().W.rows(); }
};

// Activations cached during a batched forward pass for backprop.
struct MlpCache {
  std::vector<Eigen::MatrixXd> inputs;  // input to each layer (B x in)
  Eigen::MatrixXd output;               // B x out
};

// Gradients share the layer shapes.
using MlpGrads = std::vector<LinearLayer>;

Eigen::MatrixXd mlp_forward_batch(const Mlp& mlp, const Eigen::MatrixXd& X,
                                  MlpCache* cache = nullptr);

// Single-sample forward.
Eigen::VectorXd mlp_forward(const Mlp& mlp, const Eigen::VectorXd& x);

// Backpropagate d_out (B x out); accumulates into grads, returns dX.
Eigen::MatrixXd mlp_backward(const Mlp& mlp, const MlpCache& cache,
                             const Eigen::MatrixXd& d_out, MlpGrads& grads);

MlpGrads zero_grads(const Mlp& mlp);

// Separate MLPs F_t -> C_{t-k}, one per offset.
struct StraightforwardModel {
  std::array<Mlp, 3> mlps;
};

// Shared disentangle trunk F -> [before | now] plus three linear heads:
// P_t = head0(now_t), P_{t-1} = head1(before_t), P_{t-2} = head2(before_t).
struct DisentangledModel {
  Mlp trunk;  // d_f -> ... -> 2*d_h
  std::size_t d_h = 0;
  Mlp head0, head1, head2;
};

struct TrainConfig {
  double alpha = 0.01;
  double tau = 0.07;
  double lr = 1e-5;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  std::size_t d_h = 512;
  std::size_t hidden = 1024;  // trunk / straightforward hidden width

  void validate() const;
};

struct LossReport {
  double mse = 0.0;
  double infonce = 0.0;
  double total = 0.0;
  std::array<double, 3> per_offset_mse = {0.0, 0.0, 0.0};
};

struct TraceRow {
  std::size_t epoch;
  std::string split;  // "train" or "val"
  double mse;
  double infonce;
  double total;
};

double cosine_sim(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

// Sum over offsets of per-dimension mean squared error.
double loss_mse(const std::array<Eigen::VectorXd, 3>& preds,
                const std::array<Eigen::VectorXd, 3>& targets,
                std::array<double, 3>* per_offset = nullptr);

// InfoNCE over one consecutive-signal pair: positive (b_t, n_prev) against
// the five negative pairings of the four components.
double loss_infonce(const Eigen::VectorXd& b_t, const Eigen::VectorXd& n_t,
                    const Eigen::VectorXd& b_prev,
                    const Eigen::VectorXd& n_prev, double tau);

struct DisentangledForward {
  Eigen::VectorXd b_prev, n_prev, b_t, n_t;
  std::array<Eigen::VectorXd, 3> preds;  // P_t, P_{t-1}, P_{t-2}
};

DisentangledForward forward_disentangled(const DisentangledModel& model,
                                         const Eigen::VectorXd& f_prev,
                                         const Eigen::VectorXd& f_t);

LossReport total_loss(const DisentangledForward& fwd,
                      const std::array<Eigen::VectorXd, 3>& targets,
                      const TrainConfig& cfg);

// Gradients of the batch-mean total loss.
struct DisGrads {
  MlpGrads trunk, head0, head1, head2;
};
struct SfGrads {
  std::array<MlpGrads, 3> mlps;
};

// Batch loss (and optionally analytic gradients) over window samples.
LossReport dis_batch_loss(const DisentangledModel& model,
                          std::span<const WindowSample* const> batch,
                          const TrainConfig& cfg, DisGrads* grads);
LossReport sf_batch_loss(const StraightforwardModel& model,
                         std::span<const WindowSample* const> batch,
                         const TrainConfig& cfg, SfGrads* grads);

// Flat view over a model's parameter tensors, in declaration order.
struct ParamView {
  double* data;
  std::size_t size;
  bool is_bias;
};
std::vector<ParamView> param_views(Mlp& mlp);
std::vector<ParamView> param_views(DisentangledModel& model);
std::vector<ParamView> param_views(StraightforwardModel& model);
std::vector<ParamView> param_views(DisGrads& grads);
std::vector<ParamView> param_views(SfGrads& grads);

// Decoupled weight decay Adam; biases are exempt from decay.
struct AdamWState {
  std::vector<Eigen::ArrayXd> m, v;
};
void adamw_step(std::span<const ParamView> params,
                std::span<const ParamView> grads, AdamWState& state,
                const TrainConfig& cfg, std::size_t step_index);

// Central-difference verification of the analytic gradients; returns the
// maximum relative error over all parameters.
double grad_check(DisentangledModel& model,
                  std::span<const WindowSample* const> batch,
                  const TrainConfig& cfg, double h = 1e-4);
double grad_check(StraightforwardModel& model,
                  std::span<const WindowSample* const> batch,
                  const TrainConfig& cfg, double h = 1e-4);

struct TrainResult {
  std::variant<StraightforwardModel, DisentangledModel> model;
  std::vector<TraceRow> trace;
};

// Seeded He-normal initialization; training is sequential and bitwise
// reproducible given (windows, cfg).
StraightforwardModel init_straightforward(std::uint32_t d_f, std::uint32_t d_c,
                                          const TrainConfig& cfg);
DisentangledModel init_disentangled(std::uint32_t d_f, std::uint32_t d_c,
                                    const TrainConfig& cfg);

TrainResult train_straightforward(const std::vector<WindowSample>& train,
                                  const TrainConfig& cfg,
                                  const std::vector<WindowSample>* val = nullptr);
TrainResult train_disentangled(const std::vector<WindowSample>& train,
                               const TrainConfig& cfg,
                               const std::vector<WindowSample>* val = nullptr);

// Predicted embeddings for the three offsets from one signal vector.
std::array<Eigen::VectorXd, 3> predict_offsets(const StraightforwardModel& m,
                                               const std::vector<float>& fmri_t);
std::array<Eigen::VectorXd, 3> predict_offsets(const DisentangledModel& m,
                                               const std::vector<float>& fmri_t);

// Mean per-offset MSE over a window set.
std::array<double, 3> evaluate_offset_mse(
    const std::variant<StraightforwardModel, DisentangledModel>& model,
    const std::vector<WindowSample>& windows);

// MDMW checkpoint: magic, version, JSON header, little-endian f32 blobs.
void save_checkpoint(const std::filesystem::path& path,
                     const std::variant<StraightforwardModel,
                                        DisentangledModel>& model,
                     const TrainConfig& cfg, std::uint32_t d_f,
                     std::uint32_t d_c);
struct Checkpoint {
  std::variant<StraightforwardModel, DisentangledModel> model;
  TrainConfig cfg;
  std::uint32_t d_f = 0;
  std::uint32_t d_c = 0;
};
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string trace_csv(const std::vector<TraceRow>& trace);

}  // namespace memtangle
