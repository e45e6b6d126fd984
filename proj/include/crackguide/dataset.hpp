#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "crackguide/config.hpp"
#include "crackguide/synthdata.hpp"

namespace crackguide::harness {

/// One manifest line. Paths are relative to the dataset directory.
struct ManifestRecord {
  std::string id;
  std::string split;  // "train" or "test"
  std::string image;
  std::string clean;
  std::string noisy;
  bool label_noise = false;  // noise model applied to `noisy`

  friend bool operator==(const ManifestRecord&, const ManifestRecord&) = default;
};

struct Dataset {
  std::vector<synth::Sample> train;
  std::vector<synth::Sample> test;  // noisy_mask == clean_mask
};

inline constexpr const char* kManifestName = "manifest.jsonl";

/// Train split from derive_seed(seed, {kTrainSplit}) with the configured noise;
/// test split from derive_seed(seed, {kTestSplit}) with none.
Dataset generate_dataset(const DataConfig& config);

/// Writes images/, clean/, noisy/ and the manifest under `dir`.
std::vector<ManifestRecord> write_dataset(const Dataset& data, const DataConfig& config,
                                          const std::filesystem::path& dir);

std::vector<ManifestRecord> read_manifest(const std::filesystem::path& manifest);
Dataset load_dataset(const std::filesystem::path& dir);

/// FNV-1a over ids, shapes and clean masks of the test split.
std::string test_fingerprint(const Dataset& data);

bool has_label_noise(const synth::NoiseSpec& noise);

}  // namespace crackguide::harness
