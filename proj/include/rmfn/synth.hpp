#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rmfn/pgm.hpp"
#include "rmfn/train.hpp"

namespace rmfn {

/// Two-class image generator: negatives are smooth noise, positives carry one
/// small amorphous bright region (union of ellipses) at a uniform position.
struct SynthSpec {
  long image_side = 224;
  std::size_t n_per_class = 2500;
  long lesion_min = 12;  // bounding-box side range, pixels
  long lesion_max = 40;
  long noise_cell = 16;  // lattice spacing of the coarse background octave
  double noise_amplitude = 0.2;
  double grain = 0.03;      // per-pixel background noise
  double contrast = 0.25;   // mean brightening inside the lesion
  double lesion_texture = 0.3;  // relative intensity jitter inside the lesion
  std::uint64_t seed = 7;

  friend bool operator==(const SynthSpec&, const SynthSpec&) = default;
};

void validate(const SynthSpec& spec);

enum class Split { kTrain, kTest };
std::string to_string(Split s);

/// Per class, the last floor(n/5) indices are test images.
Split split_of(const SynthSpec& spec, std::size_t index);

struct RenderedSample {
  GrayImage background;  // the image without any lesion
  GrayImage image;       // equals background for negatives
  GrayImage mask;        // 255 inside the lesion; all zero for negatives
};

/// Deterministic in (spec.seed, label, index); each image has its own stream.
RenderedSample render_sample(const SynthSpec& spec, int label, std::size_t index);

struct ManifestEntry {
  std::string path;  // relative to the manifest's directory
  int label;
  Split split;
  std::uint64_t hash;       // fnv1a64 of the file bytes
  std::string mask_path;    // positives only
  std::uint64_t mask_hash = 0;
};

struct DatasetManifest {
  int version = 1;
  SynthSpec spec;
  std::vector<ManifestEntry> entries;  // negatives in index order, then positives
};

std::string format_manifest(const DatasetManifest& manifest);
DatasetManifest parse_manifest(const std::string& text);

inline constexpr const char* kManifestName = "manifest.txt";

/// Writes images/, masks/ and manifest.txt under out_dir (created if needed).
DatasetManifest generate(const SynthSpec& spec, const std::string& out_dir);

struct SampleInfo {
  std::string path;
  GrayImage mask;  // loaded only when requested; empty otherwise
};

struct LoadedDataset {
  DatasetManifest manifest;
  std::vector<LabeledImage> train, test;
  std::vector<SampleInfo> train_info, test_info;
};

/// Reads every file listed by the manifest, verifying content hashes.
LoadedDataset load_dataset(const std::string& manifest_path, bool with_masks = false);

}  // namespace rmfn
