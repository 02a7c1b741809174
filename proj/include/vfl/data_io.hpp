#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vfl/packed_seq.hpp"
#include "vfl/training.hpp"
#include "vfl/types.hpp"

namespace vfl {

struct ManifestRecord {
  std::string video_id;
  int label = 0;
  std::string feature_path;  // relative paths resolve against the manifest directory
  Index num_frames = 0;
};

struct DatasetManifest {
  std::vector<ManifestRecord> records;
};

// CSV with header video_id,label,feature_path,num_frames. Validates unique
// ids, labels in {0,1} and positive frame counts.
DatasetManifest load_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

// Loads every referenced feature file and checks its first dimension against
// num_frames.
std::vector<FeatureSequence> load_dataset(const std::filesystem::path& manifest_path);

// k endpoint-inclusive indices out of 0..n_total-1:
// index_i = round(i*(n_total-1)/(k-1)), or [0] when k = 1.
std::vector<Index> uniform_sample_indices(Index n_total, Index k);

struct SyntheticConfig {
  Index num_benign = 381;
  Index num_malignant = 420;
  Index min_frames = 1;
  Index max_frames = 30;
  Index feature_dim = 512;
  double class_separation = 2.0;  // distance between the class mean plateaus
  double noise_scale = 1.0;
  std::uint64_t seed = 42;
};

// Benign features center on -separation/2, malignant on +separation/2, each
// ramping in over the sequence so the signal is genuinely temporal, plus
// seeded Gaussian noise. Writes dir/features/*.npy and dir/manifest.csv;
// returns the manifest path. Byte-identical for identical configs.
std::filesystem::path generate_synthetic(const SyntheticConfig& cfg,
                                         const std::filesystem::path& dir);

struct Checkpoint {
  LstmParams lstm;
  DenseParams head;
  std::uint64_t config_fingerprint = 0;
  int fold_index = 0;
  double best_val_accuracy = 0.0;
  int epoch = 0;
};

// Binary format: magic "VFLCKPT", version byte, little-endian dimension and
// metadata fields, then the raw f8 weights in order w_ih, w_hh, b, head.w,
// head.b. Round-trips bit-exactly; load rejects bad magic, version or
// length/dimension mismatches.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace vfl
