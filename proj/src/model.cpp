#include "crackguide/model.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "crackguide/binary_io.hpp"
#include "crackguide/random.hpp"

namespace crackguide::model {

namespace {

void dense_forward(const Dense& layer, std::span<const double> x, std::span<double> y) {
  for (int o = 0; o < layer.out; ++o) y[o] = layer.b[o];
  for (int i = 0; i < layer.in; ++i) {
    const double xi = x[i];
    const double* row = layer.w.data() + static_cast<std::size_t>(i) * layer.out;
    for (int o = 0; o < layer.out; ++o) y[o] += xi * row[o];
  }
}

// Accumulates dW, db and writes dx (if non-empty) for y = Wᵀx + b.
void dense_backward(const Dense& layer, std::span<const double> x, std::span<const double> gy, Dense& grad,
                    std::span<double> gx) {
  for (int o = 0; o < layer.out; ++o) grad.b[o] += gy[o];
  for (int i = 0; i < layer.in; ++i) {
    const double* row = layer.w.data() + static_cast<std::size_t>(i) * layer.out;
    double* grow = grad.w.data() + static_cast<std::size_t>(i) * layer.out;
    double acc = 0.0;
    for (int o = 0; o < layer.out; ++o) {
      grow[o] += x[i] * gy[o];
      acc += row[o] * gy[o];
    }
    if (!gx.empty()) gx[i] = acc;
  }
}

void glorot(Dense& layer, Rng& rng) {
  const double limit = std::sqrt(6.0 / (layer.in + layer.out));
  std::uniform_real_distribution<double> u(-limit, limit);
  for (auto& w : layer.w) w = u(rng);
}

double sigmoid(double s) {
  if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
  const double e = std::exp(s);
  return e / (1.0 + e);
}

void check_input(const FeatureMap& fm, const ModelParams& params) {
  if (fm.dim() != params.input_dim())
    throw ValidationError("model: feature dim " + std::to_string(fm.dim()) + " != model input dim " +
                          std::to_string(params.input_dim()));
}

// Per-pixel activations, reused across pixels.
struct Scratch {
  std::vector<double> z1, a1, h, z2, a2;
  explicit Scratch(const Network& n)
      : z1(n.adapter.tune.out), a1(n.adapter.tune.out), h(n.adapter.up.out), z2(n.head.hidden.out),
        a2(n.head.hidden.out) {}

  double run(const Network& n, std::span<const double> f) {
    dense_forward(n.adapter.tune, f, z1);
    for (std::size_t k = 0; k < z1.size(); ++k) a1[k] = gelu(z1[k]);
    dense_forward(n.adapter.up, a1, h);
    dense_forward(n.head.hidden, h, z2);
    for (std::size_t k = 0; k < z2.size(); ++k) a2[k] = gelu(z2[k]);
    double logit = n.head.out.b[0];
    for (std::size_t k = 0; k < a2.size(); ++k) logit += n.head.out.w[k] * a2[k];
    return logit;
  }
};

}  // namespace

std::array<std::vector<double>*, Network::kTensorCount> Network::tensors() {
  return {&adapter.tune.w, &adapter.tune.b, &adapter.up.w, &adapter.up.b,
          &head.hidden.w,  &head.hidden.b,  &head.out.w,   &head.out.b};
}

std::array<const std::vector<double>*, Network::kTensorCount> Network::tensors() const {
  return {&adapter.tune.w, &adapter.tune.b, &adapter.up.w, &adapter.up.b,
          &head.hidden.w,  &head.hidden.b,  &head.out.w,   &head.out.b};
}

Network Network::zeros_like() const {
  return {{Dense(adapter.tune.in, adapter.tune.out), Dense(adapter.up.in, adapter.up.out)},
          {Dense(head.hidden.in, head.hidden.out), Dense(head.out.in, head.out.out)}};
}

ModelParams init_params(const Dims& dims, std::uint64_t seed, double output_bias) {
  if (dims.input < 1 || dims.adapter_hidden < 1 || dims.adapter_out < 1 || dims.head_hidden < 1)
    throw ValidationError("model dims must be >= 1");
  ModelParams p;
  p.rng_seed = seed;
  p.weights = {{Dense(dims.input, dims.adapter_hidden), Dense(dims.adapter_hidden, dims.adapter_out)},
               {Dense(dims.adapter_out, dims.head_hidden), Dense(dims.head_hidden, 1)}};
  Rng rng(derive_seed(seed, {stream::kInit}));
  glorot(p.weights.adapter.tune, rng);
  glorot(p.weights.adapter.up, rng);
  glorot(p.weights.head.hidden, rng);
  glorot(p.weights.head.out, rng);
  p.weights.head.out.b[0] = output_bias;
  p.grads = p.weights.zeros_like();
  return p;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

std::vector<double> adapter_forward(std::span<const double> f, const AdapterBlock& a) {
  if (static_cast<int>(f.size()) != a.tune.in || a.tune.out != a.up.in)
    throw ValidationError("adapter_forward: shape mismatch");
  std::vector<double> z(a.tune.out), out(a.up.out);
  dense_forward(a.tune, f, z);
  for (auto& v : z) v = gelu(v);
  dense_forward(a.up, z, out);
  return out;
}

ProbMap forward(const FeatureMap& fm, const ModelParams& params) {
  check_input(fm, params);
  ProbMap out(fm.height(), fm.width());
  Scratch s(params.weights);
  for (std::size_t i = 0; i < fm.pixels(); ++i) {
    const double logit = s.run(params.weights, fm.pixel(i));
    if (!std::isfinite(logit)) {
      std::ostringstream msg;
      msg << "forward: non-finite logit at pixel (y=" << i / fm.width() << ", x=" << i % fm.width() << ")";
      throw NumericError(msg.str());
    }
    out[i] = sigmoid(logit);
  }
  return out;
}

FeatureMap adapter_map(const FeatureMap& fm, const ModelParams& params) {
  check_input(fm, params);
  FeatureMap out(fm.height(), fm.width(), params.weights.adapter.up.out);
  Scratch s(params.weights);
  for (std::size_t i = 0; i < fm.pixels(); ++i) {
    s.run(params.weights, fm.pixel(i));
    std::copy(s.h.begin(), s.h.end(), out.pixel(i).begin());
  }
  return out;
}

Network backward(const FeatureMap& fm, const ModelParams& params, const ProbMap& grad_prob) {
  check_input(fm, params);
  if (!grad_prob.same_shape(fm.height(), fm.width())) throw ValidationError("backward: gradient shape mismatch");
  const Network& n = params.weights;
  Network g = n.zeros_like();
  Scratch s(n);
  std::vector<double> g_z2(s.a2.size()), g_h(s.h.size()), g_a1(s.a1.size());
  for (std::size_t i = 0; i < fm.pixels(); ++i) {
    const auto f = fm.pixel(i);
    const double p = sigmoid(s.run(n, f));
    const double g_logit = grad_prob[i] * p * (1.0 - p);

    // head.out: logit = w·a2 + b
    g.head.out.b[0] += g_logit;
    for (std::size_t k = 0; k < s.a2.size(); ++k) {
      g.head.out.w[k] += g_logit * s.a2[k];
      g_z2[k] = g_logit * n.head.out.w[k] * gelu_grad(s.z2[k]);
    }
    dense_backward(n.head.hidden, s.h, g_z2, g.head.hidden, g_h);
    dense_backward(n.adapter.up, s.a1, g_h, g.adapter.up, g_a1);
    for (std::size_t k = 0; k < s.a1.size(); ++k) g_a1[k] *= gelu_grad(s.z1[k]);
    dense_backward(n.adapter.tune, f, g_a1, g.adapter.tune, {});
  }
  return g;
}

AdamW::AdamW(const Network& like, Options opt) : opt_(opt), m_(like.zeros_like()), v_(like.zeros_like()) {}

void AdamW::step(Network& weights, const Network& grads, double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
  auto w = weights.tensors();
  auto g = grads.tensors();
  auto m = m_.tensors();
  auto v = v_.tensors();
  for (std::size_t k = 0; k < Network::kTensorCount; ++k) {
    auto& wk = *w[k];
    const auto& gk = *g[k];
    auto& mk = *m[k];
    auto& vk = *v[k];
    for (std::size_t i = 0; i < wk.size(); ++i) {
      mk[i] = opt_.beta1 * mk[i] + (1.0 - opt_.beta1) * gk[i];
      vk[i] = opt_.beta2 * vk[i] + (1.0 - opt_.beta2) * gk[i] * gk[i];
      const double mhat = mk[i] / bc1;
      const double vhat = vk[i] / bc2;
      wk[i] -= lr * (mhat / (std::sqrt(vhat) + opt_.eps) + opt_.weight_decay * wk[i]);
    }
  }
}

namespace {

constexpr char kMagic[] = "CGCK";

std::vector<std::uint32_t> shape_of(const Network& n, std::size_t k) {
  const Dense* layers[] = {&n.adapter.tune, &n.adapter.up, &n.head.hidden, &n.head.out};
  const Dense& d = *layers[k / 2];
  if (k % 2 == 0) return {static_cast<std::uint32_t>(d.in), static_cast<std::uint32_t>(d.out)};
  return {static_cast<std::uint32_t>(d.out)};
}

}  // namespace

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
  BinaryWriter out(path);
  out.bytes(std::string(kMagic, 4));
  out.u32(kCheckpointVersion);
  out.u64(params.rng_seed);
  out.u32(static_cast<std::uint32_t>(Network::kTensorCount));
  for (std::size_t k = 0; k < Network::kTensorCount; ++k) {
    const auto name = Network::kTensorNames[k];
    out.u32(static_cast<std::uint32_t>(name.size()));
    out.bytes(std::string(name));
    const auto shape = shape_of(params.weights, k);
    out.u32(static_cast<std::uint32_t>(shape.size()));
    for (auto d : shape) out.u32(d);
  }
  for (const auto* t : params.weights.tensors())
    for (double v : *t) out.f32(static_cast<float>(v));
  out.close();
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  BinaryReader in(path);
  if (in.bytes(4) != std::string(kMagic, 4)) throw IoError("not a checkpoint: " + path.string());
  const auto version = in.u32();
  if (version != kCheckpointVersion)
    throw IoError("checkpoint version " + std::to_string(version) + " unsupported (expected " +
                  std::to_string(kCheckpointVersion) + ")");
  ModelParams p;
  p.rng_seed = in.u64();
  if (in.u32() != Network::kTensorCount) throw IoError("checkpoint: unexpected tensor count");
  std::array<std::vector<std::uint32_t>, Network::kTensorCount> shapes;
  for (std::size_t k = 0; k < Network::kTensorCount; ++k) {
    const auto name = in.bytes(in.u32());
    if (name != Network::kTensorNames[k]) throw IoError("checkpoint: unexpected tensor " + name);
    const auto rank = in.u32();
    if (rank != (k % 2 == 0 ? 2u : 1u)) throw IoError("checkpoint: bad rank for " + name);
    for (std::uint32_t r = 0; r < rank; ++r) shapes[k].push_back(in.u32());
  }
  const auto layer = [&](std::size_t k) {
    if (shapes[k][1] != shapes[k + 1][0]) throw IoError("checkpoint: inconsistent bias shape");
    return Dense(static_cast<int>(shapes[k][0]), static_cast<int>(shapes[k][1]));
  };
  p.weights = {{layer(0), layer(2)}, {layer(4), layer(6)}};
  const auto& w = p.weights;
  if (w.adapter.tune.out != w.adapter.up.in || w.adapter.up.out != w.head.hidden.in ||
      w.head.hidden.out != w.head.out.in || w.head.out.out != 1)
    throw IoError("checkpoint: layer shapes do not chain");
  for (auto* t : p.weights.tensors())
    for (auto& v : *t) v = static_cast<double>(in.f32());
  in.expect_end();
  p.grads = p.weights.zeros_like();
  return p;
}

}  // namespace crackguide::model
