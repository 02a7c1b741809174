#include <doctest.h>

#include <cstring>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "test_util.hpp"
#include "vfl/data_io.hpp"
#include "vfl/error.hpp"
#include "vfl/npy.hpp"
#include "vfl/rng.hpp"

using vfl::Index;
using vfl::Matrix;

namespace {

// 80-byte reference file: v1.0 magic, 54-byte compact header, 2x2 '<f4'
// payload [[1.5, -2.25], [300000, 0.0625]]
std::string reference_npy_bytes() {
  std::string header = "{'descr':'<f4','fortran_order':False,'shape':(2,2)}";
  header += "  \n";  // pad to 54 so the block reaches 64
  std::string bytes;
  bytes += '\x93';
  bytes += "NUMPY";
  bytes += '\x01';
  bytes += '\x00';
  bytes += static_cast<char>(header.size());
  bytes += '\x00';
  bytes += header;
  const float payload[4] = {1.5f, -2.25f, 300000.0f, 0.0625f};
  bytes.append(reinterpret_cast<const char*>(payload), sizeof(payload));
  return bytes;
}

}  // namespace

TEST_CASE("npy: hand-assembled 80-byte '<f4' file parses exactly") {
  testutil::TempDir tmp("vfl_npy");
  const std::string bytes = reference_npy_bytes();
  REQUIRE(bytes.size() == 80);
  const auto path = tmp.path / "ref.npy";
  testutil::write_file_bytes(path, bytes);
  const Matrix m = vfl::read_npy(path);
  REQUIRE(m.rows() == 2);
  REQUIRE(m.cols() == 2);
  CHECK(m(0, 0) == 1.5);
  CHECK(m(0, 1) == -2.25);
  CHECK(m(1, 0) == 300000.0);
  CHECK(m(1, 1) == 0.0625);
}

TEST_CASE("npy: distinct parse errors") {
  testutil::TempDir tmp("vfl_npy_err");
  const std::string good = reference_npy_bytes();
  const auto path = tmp.path / "bad.npy";

  auto expect = [&](const std::string& bytes, const char* needle) {
    testutil::write_file_bytes(path, bytes);
    const std::string msg =
        testutil::message_of<vfl::ParseError>([&] { vfl::read_npy(path); });
    CHECK(msg.find(needle) != std::string::npos);
  };

  std::string bad_magic = good;
  bad_magic[0] = 'X';
  expect(bad_magic, "bad magic");

  std::string bad_version = good;
  bad_version[6] = '\x02';
  expect(bad_version, "unsupported version");

  std::string fortran = good;
  const auto pos = fortran.find("False");
  fortran.replace(pos, 5, "True,");
  expect(fortran, "fortran order");

  std::string bad_dtype = good;
  bad_dtype.replace(bad_dtype.find("<f4"), 3, "<i4");
  expect(bad_dtype, "unsupported dtype");

  std::string truncated = good.substr(0, good.size() - 4);
  expect(truncated, "truncated payload");

  std::string shape3 = good;
  shape3.replace(shape3.find("(2,2)}  "), 8, "(2,2,1)}");  // header stays 54 bytes
  expect(shape3, "2-d shape");
}

TEST_CASE("npy: writer emits a 64-byte-aligned v1.0 header") {
  testutil::TempDir tmp("vfl_npy_w");
  vfl::Rng rng(91);
  const auto path = tmp.path / "w.npy";
  vfl::write_npy(path, oracle::random_matrix(rng, 3, 4));
  const std::string bytes = testutil::read_file_bytes(path);
  REQUIRE(bytes.size() > 10);
  CHECK(bytes[0] == '\x93');
  CHECK(bytes.substr(1, 5) == "NUMPY");
  CHECK(bytes[6] == '\x01');
  CHECK(bytes[7] == '\x00');
  const std::size_t header_len = static_cast<unsigned char>(bytes[8]) |
                                 (static_cast<std::size_t>(static_cast<unsigned char>(bytes[9])) << 8);
  CHECK((10 + header_len) % 64 == 0);
  CHECK(bytes[10 + header_len - 1] == '\n');
  CHECK(bytes.size() == 10 + header_len + 3 * 4 * sizeof(double));
}

TEST_CASE("npy: round trip is bit-exact, including signed zero") {
  testutil::TempDir tmp("vfl_npy_rt");
  vfl::Rng rng(92);
  for (int n = 0; n < 20; ++n) {
    const auto rows = static_cast<Index>(1 + rng.below(6));
    const auto cols = static_cast<Index>(1 + rng.below(6));
    Matrix m = oracle::random_matrix(rng, rows, cols, -1e6, 1e6);
    m(0, 0) = -0.0;
    if (rows * cols > 2) {
      m.data()[1] = 1e-300;
      m.data()[2] = -1e300;
    }
    const auto path = tmp.path / ("rt" + std::to_string(n) + ".npy");
    vfl::write_npy(path, m);
    const Matrix back = vfl::read_npy(path);
    CHECK(oracle::bits_equal(m, back));
  }
  CHECK(std::signbit(vfl::read_npy(tmp.path / "rt0.npy")(0, 0)));
}

TEST_CASE("npy: 1x1 zero array") {
  testutil::TempDir tmp("vfl_npy_one");
  Matrix m(1, 1);
  m << 0.0;
  const auto path = tmp.path / "one.npy";
  vfl::write_npy(path, m);
  const Matrix back = vfl::read_npy(path);
  REQUIRE(back.rows() == 1);
  REQUIRE(back.cols() == 1);
  CHECK(back(0, 0) == 0.0);
}

TEST_CASE("uniform_sample_indices: identity, single, frozen rounding") {
  std::vector<Index> identity(12);
  for (Index i = 0; i < 12; ++i) identity[static_cast<std::size_t>(i)] = i;
  CHECK(vfl::uniform_sample_indices(12, 12) == identity);

  CHECK(vfl::uniform_sample_indices(30, 1) == std::vector<Index>{0});

  CHECK(vfl::uniform_sample_indices(30, 12) ==
        std::vector<Index>{0, 3, 5, 8, 11, 13, 16, 18, 21, 24, 26, 29});
}

TEST_CASE("uniform_sample_indices: bounds and monotonicity") {
  CHECK_THROWS_AS(vfl::uniform_sample_indices(10, 0), std::invalid_argument);
  CHECK_THROWS_AS(vfl::uniform_sample_indices(10, 11), std::invalid_argument);

  vfl::Rng rng(93);
  for (int n = 0; n < 30; ++n) {
    const auto total = static_cast<Index>(2 + rng.below(60));
    const auto k = static_cast<Index>(2 + rng.below(static_cast<std::uint64_t>(total - 1)));
    const auto indices = vfl::uniform_sample_indices(total, k);
    REQUIRE(static_cast<Index>(indices.size()) == k);
    CHECK(indices.front() == 0);
    CHECK(indices.back() == total - 1);
    for (std::size_t i = 1; i < indices.size(); ++i) CHECK(indices[i] > indices[i - 1]);
  }
}

TEST_CASE("generate_synthetic: deterministic bytes for a fixed seed") {
  testutil::TempDir a("vfl_syn_a"), b("vfl_syn_b");
  vfl::SyntheticConfig cfg;
  cfg.num_benign = 4;
  cfg.num_malignant = 5;
  cfg.min_frames = 1;
  cfg.max_frames = 6;
  cfg.feature_dim = 7;
  cfg.seed = 123;
  const auto ma = vfl::generate_synthetic(cfg, a.path);
  const auto mb = vfl::generate_synthetic(cfg, b.path);
  CHECK(testutil::read_file_bytes(ma) == testutil::read_file_bytes(mb));
  CHECK(testutil::read_file_bytes(a.path / "features" / "b0000.npy") ==
        testutil::read_file_bytes(b.path / "features" / "b0000.npy"));
  CHECK(testutil::read_file_bytes(a.path / "features" / "m0004.npy") ==
        testutil::read_file_bytes(b.path / "features" / "m0004.npy"));

  vfl::SyntheticConfig other = cfg;
  other.seed = 124;
  testutil::TempDir c("vfl_syn_c");
  const auto mc = vfl::generate_synthetic(other, c.path);
  CHECK(testutil::read_file_bytes(a.path / "features" / "b0000.npy") !=
        testutil::read_file_bytes(c.path / "features" / "b0000.npy"));
}

TEST_CASE("generate_synthetic: zero noise separates the classes exactly") {
  testutil::TempDir tmp("vfl_syn_sep");
  vfl::SyntheticConfig cfg;
  cfg.num_benign = 3;
  cfg.num_malignant = 3;
  cfg.max_frames = 5;
  cfg.feature_dim = 4;
  cfg.noise_scale = 0.0;
  const auto manifest = vfl::generate_synthetic(cfg, tmp.path);
  const auto dataset = vfl::load_dataset(manifest);
  for (const auto& seq : dataset) {
    if (seq.label == 0) {
      CHECK(seq.frames.maxCoeff() < 0.0);
    } else {
      CHECK(seq.frames.minCoeff() > 0.0);
    }
  }
}

TEST_CASE("generate_synthetic: default config matches the documented shape") {
  vfl::SyntheticConfig cfg;
  CHECK(cfg.num_benign == 381);
  CHECK(cfg.num_malignant == 420);
  CHECK(cfg.min_frames == 1);
  CHECK(cfg.max_frames == 30);
  CHECK(cfg.feature_dim == 512);

  testutil::TempDir tmp("vfl_syn_def");
  const auto manifest_path = vfl::generate_synthetic(cfg, tmp.path);
  const auto manifest = vfl::load_manifest(manifest_path);
  Index benign = 0, malignant = 0;
  for (const auto& rec : manifest.records) {
    (rec.label == 0 ? benign : malignant) += 1;
    CHECK(rec.num_frames >= 1);
    CHECK(rec.num_frames <= 30);
  }
  CHECK(benign == 381);
  CHECK(malignant == 420);

  const Matrix first = vfl::read_npy(tmp.path / manifest.records.front().feature_path);
  CHECK(first.cols() == 512);
  CHECK(first.rows() == manifest.records.front().num_frames);
}

TEST_CASE("manifest: write/load round trip with relative paths") {
  testutil::TempDir tmp("vfl_man");
  vfl::Rng rng(94);
  const Matrix frames = oracle::random_matrix(rng, 3, 2);
  std::filesystem::create_directories(tmp.path / "features");
  vfl::write_npy(tmp.path / "features" / "v0.npy", frames);

  vfl::DatasetManifest manifest;
  manifest.records.push_back({"v0", 1, "features/v0.npy", 3});
  vfl::write_manifest(tmp.path / "manifest.csv", manifest);

  const auto loaded = vfl::load_manifest(tmp.path / "manifest.csv");
  REQUIRE(loaded.records.size() == 1);
  CHECK(loaded.records[0].video_id == "v0");
  CHECK(loaded.records[0].label == 1);
  CHECK(loaded.records[0].num_frames == 3);

  const auto dataset = vfl::load_dataset(tmp.path / "manifest.csv");
  REQUIRE(dataset.size() == 1);
  CHECK(oracle::bits_equal(dataset[0].frames, frames));
}

TEST_CASE("manifest: malformed inputs rejected") {
  testutil::TempDir tmp("vfl_man_err");
  const auto path = tmp.path / "manifest.csv";

  testutil::write_file_bytes(path, "id,label\n");
  CHECK(testutil::message_of<vfl::ParseError>([&] { vfl::load_manifest(path); })
            .find("bad header") != std::string::npos);

  testutil::write_file_bytes(path,
                             "video_id,label,feature_path,num_frames\n"
                             "v0,1,a.npy,3\nv0,0,b.npy,2\n");
  CHECK(testutil::message_of<vfl::ParseError>([&] { vfl::load_manifest(path); })
            .find("duplicate") != std::string::npos);

  testutil::write_file_bytes(path,
                             "video_id,label,feature_path,num_frames\nv0,2,a.npy,3\n");
  CHECK(testutil::message_of<vfl::ParseError>([&] { vfl::load_manifest(path); })
            .find("label") != std::string::npos);

  testutil::write_file_bytes(path,
                             "video_id,label,feature_path,num_frames\nv0,1,a.npy,0\n");
  CHECK(testutil::message_of<vfl::ParseError>([&] { vfl::load_manifest(path); })
            .find("num_frames") != std::string::npos);
}

TEST_CASE("load_dataset: frame-count mismatch names the video") {
  testutil::TempDir tmp("vfl_man_mismatch");
  vfl::Rng rng(95);
  vfl::write_npy(tmp.path / "v0.npy", oracle::random_matrix(rng, 3, 2));
  testutil::write_file_bytes(tmp.path / "manifest.csv",
                             "video_id,label,feature_path,num_frames\nv0,1,v0.npy,4\n");
  const std::string msg = testutil::message_of<vfl::ParseError>(
      [&] { vfl::load_dataset(tmp.path / "manifest.csv"); });
  CHECK(msg.find("v0") != std::string::npos);
  CHECK(msg.find("4") != std::string::npos);
}

TEST_CASE("load_dataset: mixed feature widths rejected") {
  testutil::TempDir tmp("vfl_man_width");
  vfl::Rng rng(99);
  vfl::write_npy(tmp.path / "v0.npy", oracle::random_matrix(rng, 2, 3));
  vfl::write_npy(tmp.path / "v1.npy", oracle::random_matrix(rng, 2, 5));
  testutil::write_file_bytes(tmp.path / "manifest.csv",
                             "video_id,label,feature_path,num_frames\n"
                             "v0,0,v0.npy,2\nv1,1,v1.npy,2\n");
  const std::string msg = testutil::message_of<vfl::ParseError>(
      [&] { vfl::load_dataset(tmp.path / "manifest.csv"); });
  CHECK(msg.find("v1") != std::string::npos);
  CHECK(msg.find("5-dimensional") != std::string::npos);
}

TEST_CASE("checkpoint: bit-exact round trip with metadata") {
  testutil::TempDir tmp("vfl_ckpt");
  vfl::Rng rng(96);
  vfl::Checkpoint ckpt;
  ckpt.lstm = vfl::init_lstm_params(5, 3, rng);
  ckpt.head = vfl::init_dense_params(2, 3, rng);
  ckpt.config_fingerprint = 0xdeadbeefcafef00dULL;
  ckpt.fold_index = 2;
  ckpt.best_val_accuracy = 0.9375;
  ckpt.epoch = 40;

  const auto path = tmp.path / "fold_2.ckpt";
  vfl::save_checkpoint(path, ckpt);
  const vfl::Checkpoint back = vfl::load_checkpoint(path);
  CHECK(oracle::bits_equal(back.lstm.w_ih, ckpt.lstm.w_ih));
  CHECK(oracle::bits_equal(back.lstm.w_hh, ckpt.lstm.w_hh));
  CHECK(back.lstm.b == ckpt.lstm.b);
  CHECK(oracle::bits_equal(back.head.w, ckpt.head.w));
  CHECK(back.head.b == ckpt.head.b);
  CHECK(back.config_fingerprint == ckpt.config_fingerprint);
  CHECK(back.fold_index == 2);
  CHECK(back.best_val_accuracy == 0.9375);
  CHECK(back.epoch == 40);
}

TEST_CASE("checkpoint: cross-fold checkpoints stay distinguishable") {
  testutil::TempDir tmp("vfl_ckpt_folds");
  vfl::Rng rng(97);
  vfl::Checkpoint first;
  first.lstm = vfl::init_lstm_params(2, 2, rng);
  first.head = vfl::init_dense_params(2, 2, rng);
  first.fold_index = 0;
  first.epoch = 20;
  vfl::Checkpoint second = first;
  second.lstm = vfl::init_lstm_params(2, 2, rng);
  second.fold_index = 1;
  second.epoch = 60;

  vfl::save_checkpoint(tmp.path / "f0.ckpt", first);
  vfl::save_checkpoint(tmp.path / "f1.ckpt", second);
  const auto a = vfl::load_checkpoint(tmp.path / "f0.ckpt");
  const auto b = vfl::load_checkpoint(tmp.path / "f1.ckpt");
  CHECK(a.fold_index == 0);
  CHECK(b.fold_index == 1);
  CHECK(a.epoch == 20);
  CHECK(b.epoch == 60);
  CHECK(!oracle::bits_equal(a.lstm.w_ih, b.lstm.w_ih));
}

TEST_CASE("checkpoint: corruption and version checks") {
  testutil::TempDir tmp("vfl_ckpt_err");
  vfl::Rng rng(98);
  vfl::Checkpoint ckpt;
  ckpt.lstm = vfl::init_lstm_params(3, 2, rng);
  ckpt.head = vfl::init_dense_params(2, 2, rng);
  const auto path = tmp.path / "c.ckpt";
  vfl::save_checkpoint(path, ckpt);
  const std::string good = testutil::read_file_bytes(path);

  auto expect = [&](std::string bytes, const char* needle) {
    testutil::write_file_bytes(path, bytes);
    const std::string msg =
        testutil::message_of<vfl::ParseError>([&] { vfl::load_checkpoint(path); });
    CHECK(msg.find(needle) != std::string::npos);
  };

  std::string bad_magic = good;
  bad_magic[0] = 'X';
  expect(bad_magic, "bad magic");

  std::string bad_version = good;
  bad_version[7] = 2;
  expect(bad_version, "version");

  std::string tampered_dims = good;
  tampered_dims[12] = 9;  // hidden-size field
  expect(tampered_dims, "expected");

  expect(good.substr(0, good.size() - 8), "holds");
}
