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


#ifndef SPARSEPOSE_CHECKPOINT_HPP_
#define SPARSEPOSE_CHECKPOINT_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

namespace sparsepose {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Binary checkpoint (.spk), little-endian:
//   bytes 0-7   magic "SPCKPT\0\0"
//   bytes 8-11  uint32 version
//   bytes 12-15 uint32 metadata length M
//   M bytes     JSON metadata (sorted keys)
//   uint32 tensor count, then per tensor:
//     uint32 name length, name bytes, uint8 dtype (0 f32, 1 f64, 2 i64),
//     uint32 rank, rank x int64 sizes, raw contiguous data.
struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  nlohmann::json metadata = nlohmann::json::object();
  std::vector<std::pair<std::string, torch::Tensor>> tensors;

  const torch::Tensor* find(const std::string& name) const;
};

std::string checkpoint_bytes(const Checkpoint& ckpt);
Checkpoint checkpoint_from_bytes(const std::string& bytes);

// Throw IoError on filesystem failures or malformed content.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace sparsepose

#endif  // SPARSEPOSE_CHECKPOINT_HPP_
