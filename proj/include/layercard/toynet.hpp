#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "layercard/io.hpp"
#include "layercard/linalg.hpp"
#include "layercard/quadratic.hpp"

namespace layercard {

// Desk-scale layered model with frozen weights, a planted teacher residual,
// and low-rank linear adapters. Blocks are pre-activation residual updates
// h <- h + V * act(W h) with a linear head; the teacher perturbs W on a
// chosen layer set by an additive low-rank term.

enum class Nonlinearity { kIdentity, kTanh };

std::string nonlinearity_name(Nonlinearity n);
Nonlinearity nonlinearity_from_name(std::string_view name);

struct ToyModelSpec {
  Index layers = 2;
  Index width = 4;
  Nonlinearity nonlinearity = Nonlinearity::kTanh;
  Index head_dim = 1;
  LayerSet teacher_layers;
  double teacher_scale = 0.0;
  std::uint64_t seed = 0;
};

// Low-rank adapter applied as W + A*B. B starts at zero so an attached
// adapter leaves the forward pass bit-identical to the frozen model.
struct Adapter {
  Matrix a;  // width x rank
  Matrix b;  // rank x width
};

struct ToyModel {
  ToyModelSpec spec;
  std::vector<Matrix> w;          // per layer, width x width
  std::vector<Matrix> v;          // per layer, width x width
  Matrix head;                    // head_dim x width
  std::vector<Matrix> teacher_w;  // per layer; equals w off teacher layers
  std::vector<std::optional<Adapter>> adapters;  // per layer
};

struct Batch {
  Matrix inputs;   // n x width, one sample per row
  Matrix targets;  // n x head_dim
};

struct LayerProfile {
  Index layer = 0;
  double grad_norm = 0.0;   // adapter-parameter gradient norm at zero
  double sigma_hat = 0.0;   // mean squared activation per feature dim
  double resnorm = 0.0;     // grad_norm / sqrt(sigma_hat)
  double erank = 0.0;       // effective rank of the feature covariance
  Vector spectrum_head;     // leading normalized covariance eigenvalues
};

struct ProfileOptions {
  Index rank = 2;
  // Mean of per-sample gradient norms (default) vs norm of the mean gradient.
  bool per_sample_grad = true;
  Index spectrum_head = 5;
};

struct FinetuneConfig {
  Index rank = 2;
  int steps = 200;
  double step_size = 0.0;  // <= 0 selects 0.1 / max layer activation energy
};

struct FinetuneResult {
  double gain = 0.0;
  double final_loss = 0.0;
  double initial_loss = 0.0;
  // Deterministic work counters standing in for wall-clock and peak memory:
  // time counts layer-pass units over the run, memory counts retained
  // activations for the backward path.
  double time_units = 0.0;
  double memory_units = 0.0;
  int steps_run = 0;
};

ToyModel generate(const ToyModelSpec& spec);

// Gaussian probe inputs with teacher outputs as targets.
Batch sample_batch(const ToyModel& m, Index n, std::uint64_t seed);

Matrix forward(const ToyModel& m, const Matrix& inputs);
Matrix teacher_forward(const ToyModel& m, const Matrix& inputs);

struct Capture {
  Matrix outputs;
  std::vector<Matrix> activations;  // activations[l-1] = block input of layer l
};
Capture forward_capture(const ToyModel& m, const Matrix& inputs);

// Mean squared-error loss: 0.5 * mean over samples of ||F(x) - target||^2.
double loss(const ToyModel& m, const Batch& batch);

// Fresh adapters on the given layers: A seeded per (layer, rank), B zero.
void attach_adapters(ToyModel& m, const LayerSet& s, Index rank);

struct AdapterGrad {
  Index layer = 0;
  Matrix da;  // width x rank
  Matrix db;  // rank x width
};

// Exact reverse-mode gradients of the mean loss w.r.t. the adapter
// parameters of the layers in s, at their current values.
std::vector<AdapterGrad> grad_adapters(const ToyModel& m, const Batch& batch,
                                       const LayerSet& s);

std::vector<LayerProfile> profile_layers(const ToyModel& m, const Batch& probe,
                                         const ProfileOptions& opts = {});

// Gradient descent on the adapters of s only; the input model is untouched.
FinetuneResult finetune(const ToyModel& m, const LayerSet& s, const Batch& train,
                        const FinetuneConfig& cfg = {});

// Per-layer unit vectors feeding the cost model: flops per layer pass and
// activations retained per layer, for a batch of n samples.
std::vector<double> layer_flop_units(const ToyModel& m, Index n);
std::vector<double> layer_act_units(const ToyModel& m, Index n);

Json model_to_json(const ToyModel& m);
ToyModel model_from_json(const Json& j);
std::string model_id(const ToyModel& m);

Csv batch_to_csv(const Batch& b);
Batch batch_from_csv(const Csv& csv, Index width, Index head_dim);

}  // namespace layercard
