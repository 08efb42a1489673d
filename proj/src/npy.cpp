// Copyright 2026 The SparsePose Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "sparsepose/npy.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <regex>
#include <string>
#include <vector>

namespace sparsepose {
namespace {

constexpr char kMagic[] = "\x93NUMPY";

void write_header(std::ofstream& out, const char* descr, Eigen::Index rows,
                  Eigen::Index cols) {
  std::string dict = std::string("{'descr': '") + descr +
                     "', 'fortran_order': False, 'shape': (" +
                     std::to_string(rows) + ", " + std::to_string(cols) + "), }";
  // magic(6) + version(2) + len(2) + dict + '\n' padded to 64 bytes.
  const std::size_t unpadded = 10 + dict.size() + 1;
  dict.append((64 - unpadded % 64) % 64, ' ');
  dict.push_back('\n');
  const auto len = static_cast<std::uint16_t>(dict.size());
  out.write(kMagic, 6);
  const char version[2] = {1, 0};
  out.write(version, 2);
  out.write(reinterpret_cast<const char*>(&len), 2);
  out.write(dict.data(), dict.size());
}

struct Header {
  std::string descr;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
};

Header read_header(std::ifstream& in, const std::filesystem::path& path) {
  char magic[6];
  in.read(magic, 6);
  if (!in || std::memcmp(magic, kMagic, 6) != 0) {
    throw IoError("not an .npy file: " + path.string());
  }
  char version[2];
  in.read(version, 2);
  std::uint32_t len = 0;
  if (version[0] == 1) {
    std::uint16_t l16 = 0;
    in.read(reinterpret_cast<char*>(&l16), 2);
    len = l16;
  } else {
    in.read(reinterpret_cast<char*>(&len), 4);
  }
  std::string dict(len, '\0');
  in.read(dict.data(), len);
  if (!in) throw IoError("truncated .npy header: " + path.string());
  static const std::regex descr_re("'descr':\\s*'([^']+)'");
  static const std::regex order_re("'fortran_order':\\s*(True|False)");
  static const std::regex shape_re("'shape':\\s*\\(\\s*(\\d+)\\s*,\\s*(\\d*)\\s*,?\\s*\\)");
  std::smatch m;
  Header h;
  if (!std::regex_search(dict, m, descr_re)) throw IoError("npy: missing descr");
  h.descr = m[1];
  if (!std::regex_search(dict, m, order_re) || m[1] == "True") {
    throw IoError("npy: only C-order arrays are supported");
  }
  if (!std::regex_search(dict, m, shape_re)) throw IoError("npy: expected a 2-D shape");
  h.rows = std::stoll(m[1]);
  h.cols = m[2].length() ? std::stoll(m[2]) : 1;
  return h;
}

}  // namespace

void write_npy_f32(const std::filesystem::path& path, const RowMatrixXd& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  write_header(out, "<f4", m.rows(), m.cols());
  const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> f =
      m.cast<float>();
  out.write(reinterpret_cast<const char*>(f.data()), f.size() * sizeof(float));
  if (!out) throw IoError("short write to " + path.string());
}

RowMatrixXd read_npy_f32(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const Header h = read_header(in, path);
  RowMatrixXd out(h.rows, h.cols);
  if (h.descr == "<f4") {
    std::vector<float> buf(out.size());
    in.read(reinterpret_cast<char*>(buf.data()), buf.size() * sizeof(float));
    for (Eigen::Index i = 0; i < out.size(); ++i) out.data()[i] = buf[i];
  } else if (h.descr == "<f8") {
    in.read(reinterpret_cast<char*>(out.data()), out.size() * sizeof(double));
  } else {
    throw IoError("npy: unsupported dtype " + h.descr + " in " + path.string());
  }
  if (!in) throw IoError("truncated .npy data: " + path.string());
  return out;
}

void write_npy_u8(const std::filesystem::path& path, const ContactMatrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  write_header(out, "|u1", m.rows(), m.cols());
  out.write(reinterpret_cast<const char*>(m.data()), m.size());
  if (!out) throw IoError("short write to " + path.string());
}

ContactMatrix read_npy_u8(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const Header h = read_header(in, path);
  if (h.descr != "|u1") throw IoError("npy: expected uint8 in " + path.string());
  ContactMatrix out(h.rows, h.cols);
  in.read(reinterpret_cast<char*>(out.data()), out.size());
  if (!in) throw IoError("truncated .npy data: " + path.string());
  return out;
}

RowMatrixXd round_to_f32(const RowMatrixXd& m) {
  return m.cast<float>().cast<double>();
}

}  // namespace sparsepose
