#include "crackguide/config.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

namespace crackguide::harness {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string format(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
std::string format(int v) { return std::to_string(v); }
std::string format(std::uint64_t v) { return std::to_string(v); }
std::string format(bool v) { return v ? "true" : "false"; }
std::string format(const std::string& v) { return v; }

template <typename T>
void parse_number(const std::string& key, const std::string& text, T& out) {
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, out);
  if (ec != std::errc{} || ptr != end) throw ValidationError("config: bad value for " + key + ": '" + text + "'");
}

void parse(const std::string& key, const std::string& text, double& out) { parse_number(key, text, out); }
void parse(const std::string& key, const std::string& text, int& out) { parse_number(key, text, out); }
void parse(const std::string& key, const std::string& text, std::uint64_t& out) { parse_number(key, text, out); }
void parse(const std::string& key, const std::string& text, bool& out) {
  if (text == "true" || text == "1")
    out = true;
  else if (text == "false" || text == "0")
    out = false;
  else
    throw ValidationError("config: bad boolean for " + key + ": '" + text + "'");
}
void parse(const std::string&, const std::string& text, std::string& out) { out = text; }

struct Field {
  std::string key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

template <typename Access>
Field field(std::string key, Access access) {
  return {key,
          [access](const ExperimentConfig& c) { return format(access(const_cast<ExperimentConfig&>(c))); },
          [access, key](ExperimentConfig& c, const std::string& v) { parse(key, v, access(c)); }};
}

#define CG_FIELD(key, member) field(key, [](ExperimentConfig& c) -> auto& { return c.member; })

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      CG_FIELD("data.n_train", data.n_train),
      CG_FIELD("data.n_test", data.n_test),
      CG_FIELD("data.seed", data.seed),
      CG_FIELD("data.crack.n_cracks", data.crack.n_cracks),
      CG_FIELD("data.crack.walk_steps", data.crack.walk_steps),
      CG_FIELD("data.crack.step_sigma", data.crack.step_sigma),
      CG_FIELD("data.crack.width_min", data.crack.width_range.min),
      CG_FIELD("data.crack.width_max", data.crack.width_range.max),
      CG_FIELD("data.crack.depth_min", data.crack.depth_range.min),
      CG_FIELD("data.crack.depth_max", data.crack.depth_range.max),
      CG_FIELD("data.crack.branch_prob", data.crack.branch_prob),
      CG_FIELD("data.scene.height", data.scene.height),
      CG_FIELD("data.scene.width", data.scene.width),
      CG_FIELD("data.scene.texture_octaves", data.scene.texture_octaves),
      CG_FIELD("data.scene.texture_amplitude", data.scene.texture_amplitude),
      CG_FIELD("data.scene.speckle_sigma", data.scene.speckle_sigma),
      CG_FIELD("data.scene.base_intensity", data.scene.base_intensity),
      CG_FIELD("data.noise.under_rate", data.noise.under_rate),
      CG_FIELD("data.noise.thin_width_max", data.noise.thin_width_max),
      CG_FIELD("data.noise.over_rate", data.noise.over_rate),
      CG_FIELD("data.noise.jitter_px", data.noise.jitter_px),
      CG_FIELD("train.epochs", train.epochs),
      CG_FIELD("train.lr0", train.lr0),
      CG_FIELD("train.beta", train.beta),
      CG_FIELD("train.lambda", train.lambda),
      CG_FIELD("train.warmup_epochs", train.warmup_epochs),
      CG_FIELD("train.refresh_period", train.refresh_period),
      CG_FIELD("train.batch", train.batch),
      CG_FIELD("train.seed", train.seed),
      CG_FIELD("train.weight_decay", train.weight_decay),
      CG_FIELD("train.output_bias", train.output_bias),
      CG_FIELD("train.soft_guidance", train.soft_guidance),
      CG_FIELD("guidance.crack_prior", guidance.crack_prior),
      CG_FIELD("guidance.em_max_iter", guidance.em_max_iter),
      CG_FIELD("guidance.em_tol", guidance.em_tol),
      CG_FIELD("guidance.max_points", guidance.max_points),
      CG_FIELD("eval.radius", eval_radius),
      CG_FIELD("output_dir", output_dir),
      CG_FIELD("label", label),
  };
  return table;
}

#undef CG_FIELD

}  // namespace

void ExperimentConfig::validate() const {
  if (data.n_train < 1) throw ValidationError("data.n_train must be >= 1");
  if (data.n_test < 1) throw ValidationError("data.n_test must be >= 1");
  data.crack.validate();
  data.scene.validate();
  data.noise.validate();
  train_config(1).validate();
  if (!(guidance.crack_prior > 0.0 && guidance.crack_prior < 1.0))
    throw ValidationError("guidance.crack_prior must lie in (0,1)");
  if (guidance.em_max_iter < 1) throw ValidationError("guidance.em_max_iter must be >= 1");
  if (!(guidance.em_tol >= 0.0)) throw ValidationError("guidance.em_tol must be >= 0");
  if (guidance.max_points < 1) throw ValidationError("guidance.max_points must be >= 1");
  if (label.empty() || label.find('/') != std::string::npos) throw ValidationError("label must be a plain name");
}

model::TrainConfig ExperimentConfig::train_config(int threads) const {
  model::TrainConfig t = train;
  t.eval_radius = eval_radius;
  t.threads = threads;
  return t;
}

mog::GuidanceOptions ExperimentConfig::guidance_options(int threads) const {
  mog::GuidanceOptions g;
  g.em.max_iter = guidance.em_max_iter;
  g.em.tol = guidance.em_tol;
  g.em.max_points = static_cast<std::size_t>(guidance.max_points);
  g.crack_prior = guidance.crack_prior;
  g.soft = train.soft_guidance;
  g.seed = train.seed;
  g.threads = threads;
  return g;
}

std::filesystem::path ExperimentConfig::resolved_output_dir() const {
  if (!output_dir.empty()) return output_dir;
  if (const char* env = std::getenv(kOutputEnv); env && *env) return env;
  return "runs";
}

void set_key(ExperimentConfig& config, const std::string& key, const std::string& value) {
  for (const auto& f : fields())
    if (f.key == key) {
      f.set(config, value);
      return;
    }
  throw ValidationError("config: unknown key '" + key + "'");
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig config;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ValidationError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    set_key(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string to_text(const ExperimentConfig& config) {
  std::string out;
  for (const auto& f : fields()) out += f.key + " = " + f.get(config) + "\n";
  return out;
}

}  // namespace crackguide::harness
