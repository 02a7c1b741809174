#include "vfl/data_io.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "vfl/error.hpp"
#include "vfl/npy.hpp"
#include "vfl/rng.hpp"

namespace vfl {

namespace {

constexpr char kManifestHeader[] = "video_id,label,feature_path,num_frames";

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  return fields;
}

}  // namespace

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ParseError("manifest: cannot open " + path.string());
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw ParseError("manifest: empty file " + path.string());
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kManifestHeader) {
    throw ParseError("manifest: bad header '" + line + "' in " + path.string());
  }

  DatasetManifest manifest;
  std::unordered_set<std::string> seen;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv(line);
    if (fields.size() != 4) {
      std::ostringstream msg;
      msg << "manifest: line " << line_no << " has " << fields.size()
          << " fields, expected 4, in " << path.string();
      throw ParseError(msg.str());
    }
    ManifestRecord rec;
    rec.video_id = fields[0];
    if (!seen.insert(rec.video_id).second) {
      throw ParseError("manifest: duplicate video_id '" + rec.video_id + "' in " +
                       path.string());
    }
    if (fields[1] != "0" && fields[1] != "1") {
      throw ParseError("manifest: label must be 0 or 1 for video '" + rec.video_id +
                       "' in " + path.string());
    }
    rec.label = fields[1] == "1" ? 1 : 0;
    rec.feature_path = fields[2];
    try {
      rec.num_frames = static_cast<Index>(std::stoll(fields[3]));
    } catch (const std::exception&) {
      rec.num_frames = 0;
    }
    if (rec.num_frames < 1) {
      throw ParseError("manifest: bad num_frames for video '" + rec.video_id + "' in " +
                       path.string());
    }
    manifest.records.push_back(std::move(rec));
  }
  return manifest;
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("manifest: cannot open " + path.string() + " for writing");
  }
  out << kManifestHeader << '\n';
  for (const auto& rec : manifest.records) {
    out << rec.video_id << ',' << rec.label << ',' << rec.feature_path << ','
        << rec.num_frames << '\n';
  }
}

std::vector<FeatureSequence> load_dataset(const std::filesystem::path& manifest_path) {
  const DatasetManifest manifest = load_manifest(manifest_path);
  const std::filesystem::path base = manifest_path.parent_path();
  std::vector<FeatureSequence> dataset;
  dataset.reserve(manifest.records.size());
  for (const auto& rec : manifest.records) {
    std::filesystem::path feature_path(rec.feature_path);
    if (feature_path.is_relative()) feature_path = base / feature_path;
    FeatureSequence seq;
    seq.video_id = rec.video_id;
    seq.label = rec.label;
    seq.frames = read_npy(feature_path);
    if (seq.frames.rows() != rec.num_frames) {
      std::ostringstream msg;
      msg << "manifest: video '" << rec.video_id << "' declares " << rec.num_frames
          << " frames but " << feature_path.string() << " holds " << seq.frames.rows();
      throw ParseError(msg.str());
    }
    if (!dataset.empty() && seq.frames.cols() != dataset.front().frames.cols()) {
      std::ostringstream msg;
      msg << "manifest: video '" << rec.video_id << "' has " << seq.frames.cols()
          << "-dimensional features, expected " << dataset.front().frames.cols();
      throw ParseError(msg.str());
    }
    dataset.push_back(std::move(seq));
  }
  return dataset;
}

std::vector<Index> uniform_sample_indices(Index n_total, Index k) {
  if (k < 1 || k > n_total) {
    std::ostringstream msg;
    msg << "uniform_sample_indices: k=" << k << " outside [1, " << n_total << "]";
    throw std::invalid_argument(msg.str());
  }
  std::vector<Index> indices;
  indices.reserve(static_cast<std::size_t>(k));
  if (k == 1) {
    indices.push_back(0);
    return indices;
  }
  for (Index i = 0; i < k; ++i) {
    const double pos = static_cast<double>(i) * static_cast<double>(n_total - 1) /
                       static_cast<double>(k - 1);
    indices.push_back(static_cast<Index>(std::llround(pos)));
  }
  return indices;
}

std::filesystem::path generate_synthetic(const SyntheticConfig& cfg,
                                         const std::filesystem::path& dir) {
  if (cfg.min_frames < 1 || cfg.max_frames < cfg.min_frames) {
    throw std::invalid_argument("generate_synthetic: bad frame range");
  }
  if (cfg.feature_dim < 1 || cfg.class_separation <= 0.0 || cfg.noise_scale < 0.0) {
    throw std::invalid_argument("generate_synthetic: bad config");
  }
  const std::filesystem::path feature_dir = dir / "features";
  std::filesystem::create_directories(feature_dir);

  Rng rng(cfg.seed);
  DatasetManifest manifest;
  for (int label = 0; label <= 1; ++label) {
    const Index count = label == 0 ? cfg.num_benign : cfg.num_malignant;
    const double sign = label == 0 ? -1.0 : 1.0;
    for (Index v = 0; v < count; ++v) {
      const Index t_len =
          cfg.min_frames +
          static_cast<Index>(rng.below(static_cast<std::uint64_t>(cfg.max_frames - cfg.min_frames + 1)));
      Matrix frames(t_len, cfg.feature_dim);
      for (Index t = 0; t < t_len; ++t) {
        // class signal ramps from half strength to full over the sequence
        const double ramp = 0.5 + 0.5 * static_cast<double>(t + 1) / static_cast<double>(t_len);
        const double mean = sign * (cfg.class_separation / 2.0) * ramp;
        for (Index d = 0; d < cfg.feature_dim; ++d) {
          frames(t, d) = mean + cfg.noise_scale * rng.normal();
        }
      }
      std::ostringstream id;
      id << (label == 0 ? 'b' : 'm') << std::setw(4) << std::setfill('0') << v;
      const std::string file_name = id.str() + ".npy";
      write_npy(feature_dir / file_name, frames);
      manifest.records.push_back(
          {id.str(), label, "features/" + file_name, t_len});
    }
  }
  const std::filesystem::path manifest_path = dir / "manifest.csv";
  write_manifest(manifest_path, manifest);
  return manifest_path;
}

namespace {

constexpr char kCkptMagic[7] = {'V', 'F', 'L', 'C', 'K', 'P', 'T'};
constexpr char kCkptVersion = 1;

template <typename T>
void put_raw(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T get_raw(const std::string& bytes, std::size_t& pos) {
  T value;
  std::memcpy(&value, bytes.data() + pos, sizeof(T));
  pos += sizeof(T);
  return value;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const Index hidden = ckpt.lstm.hidden_size();
  const Index input = ckpt.lstm.input_size();
  const Index classes = ckpt.head.classes();

  std::string bytes;
  bytes.append(kCkptMagic, sizeof(kCkptMagic));
  bytes.push_back(kCkptVersion);
  put_raw<std::uint32_t>(bytes, static_cast<std::uint32_t>(input));
  put_raw<std::uint32_t>(bytes, static_cast<std::uint32_t>(hidden));
  put_raw<std::uint32_t>(bytes, static_cast<std::uint32_t>(classes));
  put_raw<std::uint32_t>(bytes, static_cast<std::uint32_t>(ckpt.fold_index));
  put_raw<std::uint32_t>(bytes, static_cast<std::uint32_t>(ckpt.epoch));
  put_raw<double>(bytes, ckpt.best_val_accuracy);
  put_raw<std::uint64_t>(bytes, ckpt.config_fingerprint);

  auto append_block = [&bytes](const double* data, Index count) {
    bytes.append(reinterpret_cast<const char*>(data),
                 sizeof(double) * static_cast<std::size_t>(count));
  };
  append_block(ckpt.lstm.w_ih.data(), ckpt.lstm.w_ih.size());
  append_block(ckpt.lstm.w_hh.data(), ckpt.lstm.w_hh.size());
  append_block(ckpt.lstm.b.data(), ckpt.lstm.b.size());
  append_block(ckpt.head.w.data(), ckpt.head.w.size());
  append_block(ckpt.head.b.data(), ckpt.head.b.size());

  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("checkpoint: cannot open " + path.string() + " for writing");
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw std::runtime_error("checkpoint: write failed for " + path.string());
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ParseError("checkpoint: cannot open " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string bytes = std::move(buf).str();

  constexpr std::size_t kHeaderSize = sizeof(kCkptMagic) + 1 + 5 * 4 + 8 + 8;
  if (bytes.size() < kHeaderSize) {
    throw ParseError("checkpoint: truncated file " + path.string());
  }
  if (std::memcmp(bytes.data(), kCkptMagic, sizeof(kCkptMagic)) != 0) {
    throw ParseError("checkpoint: bad magic in " + path.string());
  }
  if (bytes[sizeof(kCkptMagic)] != kCkptVersion) {
    std::ostringstream msg;
    msg << "checkpoint: unsupported version " << int(bytes[sizeof(kCkptMagic)]) << " in "
        << path.string();
    throw ParseError(msg.str());
  }

  std::size_t pos = sizeof(kCkptMagic) + 1;
  const auto input = static_cast<Index>(get_raw<std::uint32_t>(bytes, pos));
  const auto hidden = static_cast<Index>(get_raw<std::uint32_t>(bytes, pos));
  const auto classes = static_cast<Index>(get_raw<std::uint32_t>(bytes, pos));

  Checkpoint ckpt;
  ckpt.fold_index = static_cast<int>(get_raw<std::uint32_t>(bytes, pos));
  ckpt.epoch = static_cast<int>(get_raw<std::uint32_t>(bytes, pos));
  ckpt.best_val_accuracy = get_raw<double>(bytes, pos);
  ckpt.config_fingerprint = get_raw<std::uint64_t>(bytes, pos);

  if (input < 1 || hidden < 1 || classes < 2) {
    throw ParseError("checkpoint: bad dimensions in " + path.string());
  }
  const std::size_t weight_count =
      static_cast<std::size_t>(4 * hidden) * static_cast<std::size_t>(input) +
      static_cast<std::size_t>(4 * hidden) * static_cast<std::size_t>(hidden) +
      static_cast<std::size_t>(4 * hidden) +
      static_cast<std::size_t>(classes) * static_cast<std::size_t>(hidden) +
      static_cast<std::size_t>(classes);
  if (bytes.size() != kHeaderSize + weight_count * sizeof(double)) {
    std::ostringstream msg;
    msg << "checkpoint: " << path.string() << " holds " << bytes.size()
        << " bytes, expected " << kHeaderSize + weight_count * sizeof(double)
        << " for dimensions " << input << "/" << hidden << "/" << classes;
    throw ParseError(msg.str());
  }

  auto read_block = [&bytes, &pos](double* data, Index count) {
    std::memcpy(data, bytes.data() + pos, sizeof(double) * static_cast<std::size_t>(count));
    pos += sizeof(double) * static_cast<std::size_t>(count);
  };
  ckpt.lstm.w_ih.resize(4 * hidden, input);
  ckpt.lstm.w_hh.resize(4 * hidden, hidden);
  ckpt.lstm.b.resize(4 * hidden);
  ckpt.head.w.resize(classes, hidden);
  ckpt.head.b.resize(classes);
  read_block(ckpt.lstm.w_ih.data(), ckpt.lstm.w_ih.size());
  read_block(ckpt.lstm.w_hh.data(), ckpt.lstm.w_hh.size());
  read_block(ckpt.lstm.b.data(), ckpt.lstm.b.size());
  read_block(ckpt.head.w.data(), ckpt.head.w.size());
  read_block(ckpt.head.b.data(), ckpt.head.b.size());
  return ckpt;
}

}  // namespace vfl
