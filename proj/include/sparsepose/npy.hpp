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


#ifndef SPARSEPOSE_NPY_HPP_
#define SPARSEPOSE_NPY_HPP_

#include <filesystem>

#include "sparsepose/types.hpp"

namespace sparsepose {

// Minimal NumPy .npy (format 1.0, C order) I/O for 2-D arrays.

// Stores as little-endian float32 ("<f4").
void write_npy_f32(const std::filesystem::path& path, const RowMatrixXd& m);
// Accepts "<f4" or "<f8".
RowMatrixXd read_npy_f32(const std::filesystem::path& path);

void write_npy_u8(const std::filesystem::path& path, const ContactMatrix& m);
ContactMatrix read_npy_u8(const std::filesystem::path& path);

// Rounds every entry to the nearest float32 value.
RowMatrixXd round_to_f32(const RowMatrixXd& m);

}  // namespace sparsepose

#endif  // SPARSEPOSE_NPY_HPP_
