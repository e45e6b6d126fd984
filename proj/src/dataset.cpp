#include "crackguide/dataset.hpp"

#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

#include "crackguide/png_io.hpp"
#include "crackguide/random.hpp"

namespace crackguide::harness {

namespace fs = std::filesystem;

namespace {

std::vector<synth::Sample> make_split(const DataConfig& c, int n, const synth::NoiseSpec& noise, std::uint64_t tag,
                                      const std::string& prefix) {
  auto samples = synth::make_dataset(n, c.crack, c.scene, noise, derive_seed(c.seed, {tag}));
  for (auto& s : samples) s.id = prefix + "_" + s.id;
  return samples;
}

class Fnv1a {
 public:
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) h_ = (h_ ^ p[i]) * 0x100000001b3ULL;
  }
  void u32(std::uint32_t v) { bytes(&v, sizeof v); }
  std::uint64_t value() const { return h_; }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

}  // namespace

bool has_label_noise(const synth::NoiseSpec& noise) {
  return noise.under_rate > 0.0 || noise.over_rate > 0.0 || noise.jitter_px > 0;
}

Dataset generate_dataset(const DataConfig& config) {
  if (config.n_train < 1 || config.n_test < 1) throw ValidationError("dataset: n_train and n_test must be >= 1");
  Dataset d;
  d.train = make_split(config, config.n_train, config.noise, stream::kTrainSplit, "train");
  d.test = make_split(config, config.n_test, synth::NoiseSpec{}, stream::kTestSplit, "test");
  return d;
}

std::vector<ManifestRecord> write_dataset(const Dataset& data, const DataConfig& config, const fs::path& dir) {
  std::error_code ec;
  for (const char* sub : {"images", "clean", "noisy"}) {
    fs::create_directories(dir / sub, ec);
    if (ec) throw IoError("cannot create " + (dir / sub).string() + ": " + ec.message());
  }

  std::vector<ManifestRecord> records;
  const auto emit = [&](const std::vector<synth::Sample>& split, const std::string& name, bool noisy) {
    for (const auto& s : split) {
      ManifestRecord r{s.id, name, "images/" + s.id + ".png", "clean/" + s.id + ".png", "noisy/" + s.id + ".png",
                       noisy};
      io::write_image(s.image, dir / r.image);
      io::write_mask(s.clean_mask, dir / r.clean);
      io::write_mask(s.noisy_mask, dir / r.noisy);
      records.push_back(std::move(r));
    }
  };
  emit(data.train, "train", has_label_noise(config.noise));
  emit(data.test, "test", false);

  const fs::path manifest = dir / kManifestName;
  std::ofstream out(manifest, std::ios::binary);
  if (!out) throw IoError("cannot write " + manifest.string());
  for (const auto& r : records) {
    const nlohmann::ordered_json j = {{"id", r.id},       {"split", r.split}, {"image", r.image},
                                      {"clean", r.clean}, {"noisy", r.noisy}, {"label_noise", r.label_noise}};
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("write failed: " + manifest.string());
  return records;
}

std::vector<ManifestRecord> read_manifest(const fs::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw IoError("cannot read manifest " + manifest.string());
  std::vector<ManifestRecord> records;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      records.push_back({j.at("id").get<std::string>(), j.at("split").get<std::string>(),
                         j.at("image").get<std::string>(), j.at("clean").get<std::string>(),
                         j.at("noisy").get<std::string>(), j.at("label_noise").get<bool>()});
    } catch (const nlohmann::json::exception& e) {
      throw IoError(manifest.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    const auto& split = records.back().split;
    if (split != "train" && split != "test")
      throw IoError(manifest.string() + ":" + std::to_string(lineno) + ": unknown split '" + split + "'");
  }
  return records;
}

Dataset load_dataset(const fs::path& dir) {
  const fs::path manifest = dir / kManifestName;
  if (!fs::exists(manifest)) throw IoError("no dataset at " + dir.string() + " (missing " + kManifestName + ")");
  Dataset d;
  for (const auto& r : read_manifest(manifest)) {
    synth::Sample s{io::read_image(dir / r.image), io::read_mask(dir / r.clean), io::read_mask(dir / r.noisy), r.id};
    if (!s.clean_mask.same_shape(s.image) || !s.noisy_mask.same_shape(s.image))
      throw IoError("dataset: mask shape differs from image for " + r.id);
    (r.split == "train" ? d.train : d.test).push_back(std::move(s));
  }
  if (d.train.empty() || d.test.empty()) throw IoError("dataset at " + dir.string() + " lacks a train or test split");
  return d;
}

std::string test_fingerprint(const Dataset& data) {
  Fnv1a h;
  for (const auto& s : data.test) {
    h.bytes(s.id.data(), s.id.size());
    h.u32(static_cast<std::uint32_t>(s.clean_mask.height()));
    h.u32(static_cast<std::uint32_t>(s.clean_mask.width()));
    h.bytes(s.clean_mask.values().data(), s.clean_mask.size());
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h.value()));
  return buf;
}

}  // namespace crackguide::harness
