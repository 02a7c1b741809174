#include "vfl/npy.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "vfl/error.hpp"

namespace vfl {

namespace {

constexpr char kMagic[6] = {'\x93', 'N', 'U', 'M', 'P', 'Y'};

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ParseError("npy: cannot open " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return std::move(buf).str();
}

// value of a quoted dict entry, e.g. 'descr': '<f8'
std::string quoted_value(const std::string& header, const std::string& key,
                         const std::filesystem::path& path) {
  const auto key_pos = header.find("'" + key + "'");
  if (key_pos == std::string::npos) {
    throw ParseError("npy: header missing key '" + key + "' in " + path.string());
  }
  const auto open = header.find('\'', key_pos + key.size() + 2);
  if (open == std::string::npos) {
    throw ParseError("npy: malformed header in " + path.string());
  }
  const auto close = header.find('\'', open + 1);
  if (close == std::string::npos) {
    throw ParseError("npy: malformed header in " + path.string());
  }
  return header.substr(open + 1, close - open - 1);
}

}  // namespace

Matrix read_npy(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() < 10) {
    throw ParseError("npy: truncated header in " + path.string());
  }
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw ParseError("npy: bad magic in " + path.string());
  }
  const auto major = static_cast<unsigned char>(bytes[6]);
  const auto minor = static_cast<unsigned char>(bytes[7]);
  if (major != 1 || minor != 0) {
    std::ostringstream msg;
    msg << "npy: unsupported version " << int(major) << "." << int(minor) << " in "
        << path.string();
    throw ParseError(msg.str());
  }
  const std::size_t header_len = static_cast<unsigned char>(bytes[8]) |
                                 (static_cast<std::size_t>(static_cast<unsigned char>(bytes[9])) << 8);
  if (bytes.size() < 10 + header_len) {
    throw ParseError("npy: truncated header in " + path.string());
  }
  const std::string header = bytes.substr(10, header_len);

  const std::string descr = quoted_value(header, "descr", path);
  std::size_t item_size = 0;
  if (descr == "<f8") {
    item_size = 8;
  } else if (descr == "<f4") {
    item_size = 4;
  } else {
    throw ParseError("npy: unsupported dtype '" + descr + "' in " + path.string());
  }

  const auto order_pos = header.find("'fortran_order'");
  if (order_pos == std::string::npos) {
    throw ParseError("npy: header missing key 'fortran_order' in " + path.string());
  }
  const auto true_pos = header.find("True", order_pos);
  const auto false_pos = header.find("False", order_pos);
  if (true_pos != std::string::npos &&
      (false_pos == std::string::npos || true_pos < false_pos)) {
    throw ParseError("npy: fortran order not supported in " + path.string());
  }
  if (false_pos == std::string::npos) {
    throw ParseError("npy: malformed fortran_order in " + path.string());
  }

  const auto shape_pos = header.find("'shape'");
  if (shape_pos == std::string::npos) {
    throw ParseError("npy: header missing key 'shape' in " + path.string());
  }
  const auto open = header.find('(', shape_pos);
  const auto close = header.find(')', shape_pos);
  if (open == std::string::npos || close == std::string::npos || close < open) {
    throw ParseError("npy: malformed shape in " + path.string());
  }
  std::vector<Index> dims;
  std::string token;
  std::istringstream shape_stream(header.substr(open + 1, close - open - 1));
  while (std::getline(shape_stream, token, ',')) {
    const auto first = token.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    dims.push_back(static_cast<Index>(std::stoll(token.substr(first))));
  }
  if (dims.size() != 2 || dims[0] < 1 || dims[1] < 1) {
    throw ParseError("npy: expected a 2-d shape in " + path.string());
  }

  const Index rows = dims[0], cols = dims[1];
  const std::size_t expected =
      static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols) * item_size;
  const std::size_t payload = bytes.size() - 10 - header_len;
  if (payload != expected) {
    std::ostringstream msg;
    msg << "npy: truncated payload in " << path.string() << " (" << payload
        << " bytes, expected " << expected << ")";
    throw ParseError(msg.str());
  }

  Matrix m(rows, cols);
  const char* src = bytes.data() + 10 + header_len;
  if (item_size == 8) {
    std::memcpy(m.data(), src, expected);
  } else {
    for (Index k = 0; k < rows * cols; ++k) {
      float v;
      std::memcpy(&v, src + static_cast<std::size_t>(k) * 4, 4);
      m.data()[k] = static_cast<double>(v);
    }
  }
  return m;
}

void write_npy(const std::filesystem::path& path, const Matrix& m) {
  if (m.rows() < 1 || m.cols() < 1) {
    throw std::invalid_argument("write_npy: empty matrix");
  }
  std::ostringstream dict;
  dict << "{'descr': '<f8', 'fortran_order': False, 'shape': (" << m.rows() << ", "
       << m.cols() << "), }";
  std::string header = dict.str();
  const std::size_t unpadded = 10 + header.size() + 1;  // +1 for the newline
  const std::size_t padded = (unpadded + 63) / 64 * 64;
  header.append(padded - unpadded, ' ');
  header.push_back('\n');

  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("write_npy: cannot open " + path.string());
  }
  out.write(kMagic, sizeof(kMagic));
  out.put('\x01');
  out.put('\x00');
  const auto header_len = static_cast<std::uint16_t>(header.size());
  out.put(static_cast<char>(header_len & 0xff));
  out.put(static_cast<char>(header_len >> 8));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(m.size())));
  if (!out) {
    throw std::runtime_error("write_npy: write failed for " + path.string());
  }
}

}  // namespace vfl
