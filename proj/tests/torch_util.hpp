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


#ifndef SPARSEPOSE_TESTS_TORCH_UTIL_HPP_
#define SPARSEPOSE_TESTS_TORCH_UTIL_HPP_

#include <algorithm>
#include <functional>

#include <torch/torch.h>

namespace sparsepose::testing {

// Central differences of a scalar function, evaluated entry by entry in
// float64 without autograd.
inline torch::Tensor numeric_gradient(const std::function<torch::Tensor(const torch::Tensor&)>& f,
                                      const torch::Tensor& x, double eps = 1e-6) {
  torch::NoGradGuard guard;
  auto base = x.detach().clone().to(torch::kFloat64);
  auto grad = torch::zeros_like(base);
  auto flat = base.view(-1);
  auto g = grad.view(-1);
  for (int64_t i = 0; i < flat.numel(); ++i) {
    const double v = flat[i].item<double>();
    flat[i] = v + eps;
    const double up = f(base).item<double>();
    flat[i] = v - eps;
    const double down = f(base).item<double>();
    flat[i] = v;
    g[i] = (up - down) / (2.0 * eps);
  }
  return grad;
}

inline torch::Tensor analytic_gradient(const std::function<torch::Tensor(const torch::Tensor&)>& f,
                                       const torch::Tensor& x) {
  auto leaf = x.detach().clone().to(torch::kFloat64).requires_grad_(true);
  f(leaf).backward();
  return leaf.grad().detach().clone();
}

inline double relative_error(const torch::Tensor& a, const torch::Tensor& b) {
  const double diff = (a - b).norm().item<double>();
  const double scale = std::max(b.norm().item<double>(), 1e-8);
  return diff / scale;
}

inline double gradient_error(const std::function<torch::Tensor(const torch::Tensor&)>& f,
                             const torch::Tensor& x, double eps = 1e-6) {
  return relative_error(analytic_gradient(f, x), numeric_gradient(f, x, eps));
}

// Parameter gradient of a module-level scalar against central differences,
// perturbing each entry of `param` in place.
inline double parameter_gradient_error(const std::function<torch::Tensor()>& f,
                                       torch::Tensor param, double eps = 1e-6) {
  if (param.grad().defined()) param.mutable_grad().zero_();
  f().backward();
  const auto analytic = param.grad().detach().clone();
  torch::NoGradGuard guard;
  auto numeric = torch::zeros_like(analytic);
  auto flat = param.view(-1);
  auto g = numeric.view(-1);
  for (int64_t i = 0; i < flat.numel(); ++i) {
    const double v = flat[i].item<double>();
    flat[i] = v + eps;
    const double up = f().item<double>();
    flat[i] = v - eps;
    const double down = f().item<double>();
    flat[i] = v;
    g[i] = (up - down) / (2.0 * eps);
  }
  return relative_error(analytic, numeric);
}

}  // namespace sparsepose::testing

#endif  // SPARSEPOSE_TESTS_TORCH_UTIL_HPP_
