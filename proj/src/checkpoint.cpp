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


#include "sparsepose/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "sparsepose/types.hpp"

namespace sparsepose {

namespace {

static_assert(std::endian::native == std::endian::little, "little-endian host required");

constexpr char kMagic[8] = {'S', 'P', 'C', 'K', 'P', 'T', '\0', '\0'};

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& s) : s_(s) {}

  template <typename T>
  T get() {
    T v;
    std::memcpy(&v, take(sizeof(T)), sizeof(T));
    return v;
  }
  const char* take(std::size_t n) {
    if (n > s_.size() - pos_) throw IoError("checkpoint: truncated data");
    const char* p = s_.data() + pos_;
    pos_ += n;
    return p;
  }
  bool done() const { return pos_ == s_.size(); }

 private:
  const std::string& s_;
  std::size_t pos_ = 0;
};

std::uint8_t dtype_code(torch::ScalarType t) {
  switch (t) {
    case torch::kFloat32: return 0;
    case torch::kFloat64: return 1;
    case torch::kInt64: return 2;
    default: throw IoError("checkpoint: unsupported tensor dtype");
  }
}

torch::ScalarType dtype_from(std::uint8_t code) {
  switch (code) {
    case 0: return torch::kFloat32;
    case 1: return torch::kFloat64;
    case 2: return torch::kInt64;
    default: throw IoError("checkpoint: unknown dtype code");
  }
}

}  // namespace

const torch::Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return &t;
  }
  return nullptr;
}

std::string checkpoint_bytes(const Checkpoint& ckpt) {
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, ckpt.version);
  const std::string meta = ckpt.metadata.dump();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(meta.size()));
  out += meta;
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, tensor] : ckpt.tensors) {
    const auto t = tensor.detach().contiguous().cpu();
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put<std::uint8_t>(out, dtype_code(t.scalar_type()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.dim()));
    for (auto s : t.sizes()) put<std::int64_t>(out, s);
    out.append(static_cast<const char*>(t.data_ptr()), t.nbytes());
  }
  return out;
}

Checkpoint checkpoint_from_bytes(const std::string& bytes) {
  Reader r(bytes);
  if (std::memcmp(r.take(sizeof(kMagic)), kMagic, sizeof(kMagic)) != 0) {
    throw IoError("checkpoint: bad magic");
  }
  Checkpoint c;
  c.version = r.get<std::uint32_t>();
  if (c.version != kCheckpointVersion) {
    throw IoError("checkpoint: unsupported version " + std::to_string(c.version));
  }
  const auto meta_len = r.get<std::uint32_t>();
  try {
    c.metadata = nlohmann::json::parse(std::string(r.take(meta_len), meta_len));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("checkpoint: bad metadata: ") + e.what());
  }
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = r.get<std::uint32_t>();
    std::string name(r.take(name_len), name_len);
    const auto dtype = dtype_from(r.get<std::uint8_t>());
    const auto rank = r.get<std::uint32_t>();
    std::vector<int64_t> sizes(rank);
    for (auto& s : sizes) {
      s = r.get<std::int64_t>();
      if (s < 0) throw IoError("checkpoint: negative size");
    }
    auto t = torch::empty(sizes, dtype);
    std::memcpy(t.data_ptr(), r.take(t.nbytes()), t.nbytes());
    c.tensors.emplace_back(std::move(name), std::move(t));
  }
  if (!r.done()) throw IoError("checkpoint: trailing bytes");
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  const auto bytes = checkpoint_bytes(ckpt);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return checkpoint_from_bytes(ss.str());
}

}  // namespace sparsepose
