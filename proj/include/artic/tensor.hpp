// Copyright 2026 The Artic Authors
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

#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace artic {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);
std::size_t shape_numel(const Shape& s);

// Storage shared between tensor handles and the tape's backward closures.
// Values are row-major 64-bit floats. `grad` stays empty until a backward
// pass touches the tensor; once present it always matches `val` in size.
struct TensorData {
  Shape shape;
  std::vector<double> val;
  std::vector<double> grad;
  bool requires_grad = false;
  int node_id = -1;  // producing tape node, -1 for leaves/constants
};

// Cheap shared handle to TensorData. Copies alias the same storage, which is
// what the tape relies on: closures capture the storage, not the handle.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(d_); }

  const Shape& shape() const;
  std::size_t ndim() const;
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> values() const;
  std::span<double> values_mut();
  double item() const;  // scalar tensors only

  bool requires_grad() const;
  void set_requires_grad(bool rg);

  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> grad_mut();  // allocates zeros when missing
  void zero_grad();

  int node_id() const;

  // Storage identity; parameter registries key on this.
  TensorData* raw() const { return d_.get(); }
  const std::shared_ptr<TensorData>& shared() const;

 private:
  explicit Tensor(std::shared_ptr<TensorData> d) : d_(std::move(d)) {}
  std::shared_ptr<TensorData> d_;
};

// Allocates (zero-filled) grad storage if absent and returns it.
std::span<double> grad_buffer(TensorData& d);

}  // namespace artic
