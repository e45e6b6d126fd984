#include "crackguide/mog.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>

#include <nlohmann/json.hpp>

#include "crackguide/random.hpp"

namespace crackguide::mog {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
const double kLog2Pi = std::log(2.0 * std::numbers::pi);

double log_sum_exp(std::span<const double> v) {
  double hi = kNegInf;
  for (double x : v) hi = std::max(hi, x);
  if (hi == kNegInf) return kNegInf;
  double s = 0.0;
  for (double x : v) s += std::exp(x - hi);
  return hi + std::log(s);
}

GaussianComponent fit_partition(const FeatureMap& fm, const std::vector<std::size_t>& idx) {
  const int d = fm.dim();
  GaussianComponent c;
  c.mean.assign(d, 0.0);
  c.var.assign(d, 0.0);
  for (auto i : idx)
    for (int k = 0; k < d; ++k) c.mean[k] += fm.pixel(i)[k];
  for (auto& m : c.mean) m /= static_cast<double>(idx.size());
  for (auto i : idx)
    for (int k = 0; k < d; ++k) {
      const double r = fm.pixel(i)[k] - c.mean[k];
      c.var[k] += r * r;
    }
  for (auto& v : c.var) v = std::max(kVarFloor, v / static_cast<double>(idx.size()));
  c.weight = static_cast<double>(idx.size()) / static_cast<double>(fm.pixels());
  return c;
}

void check_component(const GaussianComponent& c, int dim) {
  if (c.dim() != dim || static_cast<int>(c.var.size()) != dim)
    throw ValidationError("mog: component dimension does not match data");
}

}  // namespace

std::string_view to_string(ClassId c) { return c == ClassId::kCrack ? "crack" : "background"; }

double GaussianComponent::log_density(std::span<const double> x) const {
  double acc = 0.0;
  for (std::size_t k = 0; k < mean.size(); ++k) {
    const double r = x[k] - mean[k];
    acc += kLog2Pi + std::log(var[k]) + r * r / var[k];
  }
  return -0.5 * acc;
}

double ClassMixture::log_density(std::span<const double> x) const {
  std::vector<double> terms;
  terms.reserve(components.size());
  for (const auto& c : components)
    if (c.weight > 0.0) terms.push_back(std::log(c.weight) + c.log_density(x));
  return log_sum_exp(terms);
}

InitComponents init_per_image(const FeatureMap& fm, const ProbMap& prediction) {
  if (!prediction.same_shape(fm.height(), fm.width())) throw ValidationError("init_per_image: shape mismatch");
  if (fm.pixels() == 0) throw ValidationError("init_per_image: empty feature map");
  std::vector<std::size_t> crack, background;
  for (std::size_t i = 0; i < fm.pixels(); ++i) (prediction[i] >= 0.5 ? crack : background).push_back(i);

  InitComponents out;
  if (background.empty()) {
    std::vector<std::size_t> all(fm.pixels());
    std::iota(all.begin(), all.end(), std::size_t{0});
    out.background = fit_partition(fm, all);
    return out;
  }
  out.background = fit_partition(fm, background);
  if (crack.size() >= kMinCrackPixels) out.crack = fit_partition(fm, crack);
  return out;
}

PointSet sample_points(const FeatureMap& fm, std::size_t max_points, std::uint64_t seed) {
  const std::size_t n = fm.pixels();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (n > max_points) {
    Rng rng(seed);
    for (std::size_t i = 0; i < max_points; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, n - 1);
      std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(max_points);
    std::sort(idx.begin(), idx.end());
  }
  PointSet ps{idx.size(), fm.dim(), {}};
  ps.values.reserve(idx.size() * static_cast<std::size_t>(fm.dim()));
  for (auto i : idx) {
    const auto p = fm.pixel(i);
    ps.values.insert(ps.values.end(), p.begin(), p.end());
  }
  return ps;
}

Responsibilities e_step(const PointSet& points, std::span<const GaussianComponent> components) {
  for (const auto& c : components) check_component(c, points.dim);
  const std::size_t k_count = components.size();
  Responsibilities r{points.count, k_count, std::vector<double>(points.count * k_count), 0.0};
  std::vector<double> log_w(k_count);
  for (std::size_t k = 0; k < k_count; ++k) log_w[k] = components[k].weight > 0 ? std::log(components[k].weight) : kNegInf;
  std::vector<double> lp(k_count);
  for (std::size_t i = 0; i < points.count; ++i) {
    const auto x = points.point(i);
    for (std::size_t k = 0; k < k_count; ++k) lp[k] = log_w[k] + components[k].log_density(x);
    const double norm = log_sum_exp(lp);
    r.log_likelihood += norm;
    for (std::size_t k = 0; k < k_count; ++k) r.gamma[i * k_count + k] = std::exp(lp[k] - norm);
  }
  return r;
}

std::vector<GaussianComponent> m_step(const PointSet& points, const Responsibilities& resp,
                                      std::span<const GaussianComponent> previous) {
  const int d = points.dim;
  std::vector<GaussianComponent> out;
  out.reserve(resp.components);
  for (std::size_t k = 0; k < resp.components; ++k) {
    GaussianComponent c;
    c.image_id = previous[k].image_id;
    c.mean.assign(d, 0.0);
    c.var.assign(d, 0.0);
    double nk = 0.0;
    for (std::size_t i = 0; i < points.count; ++i) {
      const double g = resp.at(i, k);
      nk += g;
      const auto x = points.point(i);
      for (int j = 0; j < d; ++j) c.mean[j] += g * x[j];
    }
    c.weight = nk / static_cast<double>(points.count);
    if (nk > 0.0) {
      for (auto& m : c.mean) m /= nk;
      for (std::size_t i = 0; i < points.count; ++i) {
        const double g = resp.at(i, k);
        const auto x = points.point(i);
        for (int j = 0; j < d; ++j) {
          const double r = x[j] - c.mean[j];
          c.var[j] += g * r * r;
        }
      }
      for (auto& v : c.var) v = std::max(kVarFloor, v / nk);
    } else {
      c.mean = previous[k].mean;
      c.var.assign(d, kVarFloor);
    }
    out.push_back(std::move(c));
  }
  return out;
}

EmResult em_fit(const PointSet& points, std::vector<GaussianComponent> init, const EmOptions& options,
                double mass_scale) {
  if (init.empty()) throw ValidationError("em_fit: at least one component required");
  if (points.count == 0) throw ValidationError("em_fit: no data points");
  if (options.max_iter < 1 || !(options.tol >= 0.0)) throw ValidationError("em_fit: bad options");

  EmResult out;
  out.components = std::move(init);
  out.survivors.resize(out.components.size());
  std::iota(out.survivors.begin(), out.survivors.end(), std::size_t{0});

  Responsibilities resp = e_step(points, out.components);
  out.log_likelihood.push_back(resp.log_likelihood);
  if (options.on_iteration) options.on_iteration(0, resp.log_likelihood, out.components);
  for (int it = 1; it <= options.max_iter; ++it) {
    auto next = m_step(points, resp, out.components);

    // Drop collapsed components and renormalize the rest.
    for (std::size_t k = next.size(); k-- > 0;) {
      if (next.size() > 1 && next[k].weight < kCollapseWeight) {
        out.events.push_back("iteration " + std::to_string(it) + ": component " +
                             std::to_string(out.survivors[k]) + " collapsed (weight " +
                             std::to_string(next[k].weight) + "), removed");
        next.erase(next.begin() + static_cast<std::ptrdiff_t>(k));
        out.survivors.erase(out.survivors.begin() + static_cast<std::ptrdiff_t>(k));
      }
    }
    double wsum = 0.0;
    for (const auto& c : next) wsum += c.weight;
    for (auto& c : next) c.weight /= wsum;

    out.components = std::move(next);
    const double prev = resp.log_likelihood;
    resp = e_step(points, out.components);
    out.log_likelihood.push_back(resp.log_likelihood);
    out.iterations = it;
    if (options.on_iteration) options.on_iteration(it, resp.log_likelihood, out.components);
    if (std::abs(resp.log_likelihood - prev) < options.tol * std::abs(prev)) {
      out.converged = true;
      break;
    }
  }

  out.mass.assign(out.components.size(), 0.0);
  for (std::size_t i = 0; i < resp.points; ++i)
    for (std::size_t k = 0; k < resp.components; ++k) out.mass[k] += resp.at(i, k);
  for (auto& m : out.mass) m *= mass_scale;
  return out;
}

EmResult em_fit_image(const FeatureMap& fm, std::vector<GaussianComponent> init, const EmOptions& options) {
  const PointSet points = sample_points(fm, options.max_points, options.subsample_seed);
  const double scale = points.count ? static_cast<double>(fm.pixels()) / static_cast<double>(points.count) : 1.0;
  return em_fit(points, std::move(init), options, scale);
}

MogModel pool_mixtures(const std::vector<ImageFit>& fits) {
  MogModel model;
  double crack_total = 0.0, bg_total = 0.0;
  for (const auto& f : fits) {
    if (f.crack && f.crack_mass > 0.0) {
      auto c = *f.crack;
      c.image_id = f.image_id;
      c.weight = f.crack_mass;
      crack_total += f.crack_mass;
      model.crack.components.push_back(std::move(c));
    }
    if (f.background && f.background_mass > 0.0) {
      auto c = *f.background;
      c.image_id = f.image_id;
      c.weight = f.background_mass;
      bg_total += f.background_mass;
      model.background.components.push_back(std::move(c));
    }
  }
  if (model.background.components.empty()) throw ValidationError("pool_mixtures: no background component");
  for (auto& c : model.crack.components) c.weight /= crack_total;
  for (auto& c : model.background.components) c.weight /= bg_total;
  return model;
}

PosteriorEvaluator::PosteriorEvaluator(const MogModel& model, double crack_prior) {
  if (model.crack.components.empty() || model.background.components.empty())
    throw ValidationError("posterior: both class mixtures must be nonempty");
  if (!(crack_prior > 0.0 && crack_prior < 1.0)) throw ValidationError("posterior: crack prior must lie in (0,1)");
  dim_ = model.background.components.front().dim();
  const auto compile = [&](const ClassMixture& mix, std::vector<Compiled>& out) {
    for (const auto& c : mix.components) {
      check_component(c, dim_);
      if (c.weight <= 0.0) continue;
      Compiled k{c.mean, std::vector<double>(c.var.size()), std::log(c.weight)};
      for (std::size_t j = 0; j < c.var.size(); ++j) {
        k.inv_var[j] = 1.0 / c.var[j];
        k.log_const -= 0.5 * (kLog2Pi + std::log(c.var[j]));
      }
      out.push_back(std::move(k));
    }
  };
  compile(model.crack, crack_);
  compile(model.background, background_);
  log_prior_ratio_ = std::log(crack_prior) - std::log1p(-crack_prior);
}

double PosteriorEvaluator::class_log_density(const std::vector<Compiled>& comps, std::span<const double> x) {
  double hi = kNegInf;
  // Two passes keep the inner loop allocation-free.
  const auto term = [&](const Compiled& c) {
    double m = 0.0;
    for (std::size_t j = 0; j < c.mean.size(); ++j) {
      const double r = x[j] - c.mean[j];
      m += r * r * c.inv_var[j];
    }
    return c.log_const - 0.5 * m;
  };
  for (const auto& c : comps) hi = std::max(hi, term(c));
  if (hi == kNegInf || !std::isfinite(hi)) return hi;
  double s = 0.0;
  for (const auto& c : comps) s += std::exp(term(c) - hi);
  return hi + std::log(s);
}

Posterior PosteriorEvaluator::operator()(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != dim_) throw ValidationError("posterior: dimension mismatch");
  const double lc = class_log_density(crack_, x);
  const double lb = class_log_density(background_, x);
  if (lc == kNegInf && lb == kNegInf) return {0.5, 0.5, true};
  // p_crack = σ(lc - lb + log prior ratio)
  const double t = lc - lb + log_prior_ratio_;
  Posterior p;
  if (t >= 0.0) {
    const double e = std::exp(-t);
    p.p_crack = 1.0 / (1.0 + e);
    p.p_background = e / (1.0 + e);
  } else {
    const double e = std::exp(t);
    p.p_crack = e / (1.0 + e);
    p.p_background = 1.0 / (1.0 + e);
  }
  return p;
}

Posterior posterior(std::span<const double> x, const MogModel& model) { return PosteriorEvaluator(model)(x); }

PseudoLabels generate_pseudo_labels(const FeatureMap& fm, const MogModel& model, double crack_prior) {
  PseudoLabels out;
  out.labels = MaskGrid(fm.height(), fm.width(), 0);
  out.confidence = Grid<double>(fm.height(), fm.width(), 1.0);
  out.crack_posterior = Grid<double>(fm.height(), fm.width(), 0.0);
  if (model.background.components.empty()) throw ValidationError("generate_pseudo_labels: empty background mixture");
  if (model.background.components.front().dim() != fm.dim())
    throw ValidationError("generate_pseudo_labels: feature dim does not match model");
  if (model.degenerate()) {
    out.degenerate = true;
    return out;
  }
  const PosteriorEvaluator eval(model, crack_prior);
  for (std::size_t i = 0; i < fm.pixels(); ++i) {
    const Posterior p = eval(fm.pixel(i));
    out.labels[i] = p.p_crack > p.p_background;
    out.confidence[i] = std::max(p.p_crack, p.p_background);
    out.crack_posterior[i] = p.p_crack;
    out.uninformative += p.uninformative;
  }
  return out;
}

void write_dump(const MogModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write MoG dump: " + path.string());
  for (const auto* mix : {&model.crack, &model.background})
    for (const auto& c : mix->components) {
      nlohmann::json rec = {{"class", to_string(mix->class_id)},
                            {"image_id", c.image_id},
                            {"weight", c.weight},
                            {"mean", c.mean},
                            {"var", c.var}};
      out << rec.dump() << '\n';
    }
}

MogModel read_dump(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read MoG dump: " + path.string());
  MogModel model;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto rec = nlohmann::json::parse(line);
    GaussianComponent c{rec.at("mean").get<std::vector<double>>(), rec.at("var").get<std::vector<double>>(),
                        rec.at("weight").get<double>(), rec.at("image_id").get<std::string>()};
    const auto cls = rec.at("class").get<std::string>();
    if (cls == "crack")
      model.crack.components.push_back(std::move(c));
    else if (cls == "background")
      model.background.components.push_back(std::move(c));
    else
      throw IoError("MoG dump: unknown class " + cls);
  }
  return model;
}

}  // namespace crackguide::mog
