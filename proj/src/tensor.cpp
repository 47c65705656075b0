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

#include "artic/tensor.hpp"

#include <stdexcept>

namespace artic {

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  out += "]";
  return out;
}

std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t e : s) n *= e;
  return n;
}

namespace {
const TensorData& deref(const std::shared_ptr<TensorData>& d) {
  if (!d) throw std::runtime_error("tensor: use of undefined tensor handle");
  return *d;
}
TensorData& deref_mut(const std::shared_ptr<TensorData>& d) {
  if (!d) throw std::runtime_error("tensor: use of undefined tensor handle");
  return *d;
}
}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  auto d = std::make_shared<TensorData>();
  d->val.assign(shape_numel(shape), value);
  d->shape = std::move(shape);
  d->requires_grad = requires_grad;
  return Tensor(std::move(d));
}

Tensor Tensor::from(Shape shape, std::vector<double> values,
                    bool requires_grad) {
  if (shape_numel(shape) != values.size()) {
    throw std::invalid_argument("tensor: shape " + shape_str(shape) +
                                " does not match value count " +
                                std::to_string(values.size()));
  }
  auto d = std::make_shared<TensorData>();
  d->shape = std::move(shape);
  d->val = std::move(values);
  d->requires_grad = requires_grad;
  return Tensor(std::move(d));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({1}, {value}, requires_grad);
}

const Shape& Tensor::shape() const { return deref(d_).shape; }

std::size_t Tensor::ndim() const { return deref(d_).shape.size(); }

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = deref(d_).shape;
  if (axis >= s.size()) {
    throw std::invalid_argument("tensor: axis " + std::to_string(axis) +
                                " out of range for shape " + shape_str(s));
  }
  return s[axis];
}

std::size_t Tensor::numel() const { return deref(d_).val.size(); }

std::span<const double> Tensor::values() const { return deref(d_).val; }

std::span<double> Tensor::values_mut() { return deref_mut(d_).val; }

double Tensor::item() const {
  const auto& d = deref(d_);
  if (d.val.size() != 1) {
    throw std::invalid_argument("tensor: item() on non-scalar shape " +
                                shape_str(d.shape));
  }
  return d.val[0];
}

bool Tensor::requires_grad() const { return deref(d_).requires_grad; }

void Tensor::set_requires_grad(bool rg) { deref_mut(d_).requires_grad = rg; }

bool Tensor::has_grad() const { return !deref(d_).grad.empty(); }

std::span<const double> Tensor::grad() const {
  const auto& d = deref(d_);
  if (d.grad.empty()) {
    throw std::runtime_error("tensor: grad accessed before backward");
  }
  return d.grad;
}

std::span<double> Tensor::grad_mut() { return grad_buffer(deref_mut(d_)); }

void Tensor::zero_grad() {
  auto& d = deref_mut(d_);
  d.grad.assign(d.val.size(), 0.0);
}

int Tensor::node_id() const { return deref(d_).node_id; }

const std::shared_ptr<TensorData>& Tensor::shared() const {
  if (!d_) throw std::runtime_error("tensor: use of undefined tensor handle");
  return d_;
}

std::span<double> grad_buffer(TensorData& d) {
  if (d.grad.empty()) d.grad.assign(d.val.size(), 0.0);
  return d.grad;
}

}  // namespace artic
