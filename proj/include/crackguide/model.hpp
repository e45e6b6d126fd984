#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "crackguide/features.hpp"
#include "crackguide/grid.hpp"

namespace crackguide::model {

/// Fully connected layer; w is in×out row-major, so w[i * out + o].
struct Dense {
  int in = 0;
  int out = 0;
  std::vector<double> w;
  std::vector<double> b;

  Dense() = default;
  Dense(int in_dim, int out_dim)
      : in(in_dim), out(out_dim), w(static_cast<std::size_t>(in_dim) * out_dim, 0.0), b(out_dim, 0.0) {}

  friend bool operator==(const Dense&, const Dense&) = default;
};

/// P = W_up · GELU(W_tune · f + b_tune) + b_up
struct AdapterBlock {
  Dense tune;
  Dense up;
  friend bool operator==(const AdapterBlock&, const AdapterBlock&) = default;
};

/// logit = W2 · GELU(W1 · h + b1) + b2
struct ClassifierHead {
  Dense hidden;
  Dense out;
  friend bool operator==(const ClassifierHead&, const ClassifierHead&) = default;
};

struct Network {
  AdapterBlock adapter;
  ClassifierHead head;

  static constexpr std::size_t kTensorCount = 8;
  static constexpr std::array<std::string_view, kTensorCount> kTensorNames = {
      "adapter.tune.w", "adapter.tune.b", "adapter.up.w", "adapter.up.b",
      "head.hidden.w",  "head.hidden.b",  "head.out.w",   "head.out.b"};

  std::array<std::vector<double>*, kTensorCount> tensors();
  std::array<const std::vector<double>*, kTensorCount> tensors() const;
  /// Same layer shapes, all values zero.
  Network zeros_like() const;

  friend bool operator==(const Network&, const Network&) = default;
};

struct Dims {
  int input = features::kDim;
  int adapter_hidden = 16;  // H_t
  int adapter_out = 8;      // D_out
  int head_hidden = 16;     // H_c
};

struct ModelParams {
  Network weights;
  Network grads;
  std::uint64_t rng_seed = 0;

  int input_dim() const { return weights.adapter.tune.in; }
};

/// Glorot-uniform weights, zero biases except the output bias.
ModelParams init_params(const Dims& dims, std::uint64_t seed, double output_bias = 0.0);

double gelu(double x);
double gelu_grad(double x);

std::vector<double> adapter_forward(std::span<const double> f, const AdapterBlock& a);

/// Per-pixel sigmoid(head(adapter(f))). Throws NumericError on NaN/Inf.
ProbMap forward(const FeatureMap& fm, const ModelParams& params);

/// Adapter outputs per pixel, H×W×D_out.
FeatureMap adapter_map(const FeatureMap& fm, const ModelParams& params);

/// Reverse-mode gradient of a loss given dL/dp for every pixel.
Network backward(const FeatureMap& fm, const ModelParams& params, const ProbMap& grad_prob);

struct AdamWOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
};

/// Decoupled weight decay Adam.
class AdamW {
 public:
  using Options = AdamWOptions;

  explicit AdamW(const Network& like, Options opt = {});

  void step(Network& weights, const Network& grads, double lr);
  std::int64_t steps() const { return t_; }

 private:
  Options opt_;
  Network m_;
  Network v_;
  std::int64_t t_ = 0;
};

/// Versioned header, shape table, then f32 LE values.
void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path);

inline constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace crackguide::model
