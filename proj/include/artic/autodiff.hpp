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

#include <functional>
#include <initializer_list>
#include <string>
#include <vector>

#include "artic/rng.hpp"
#include "artic/tensor.hpp"

namespace artic {

// Dynamic tape. Operations append nodes in execution order, which is a valid
// topological order by construction (inputs always exist before outputs).
// One graph belongs to one execution context and is rebuilt every step;
// dropping the graph frees all saved intermediates.
class Graph {
 public:
  explicit Graph(bool recording = true) : recording_(recording) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool recording() const { return recording_; }

  // Registers a backward closure. Assigns and returns the node id, which is
  // also stamped on `output`. Inputs may be leaves (node id -1).
  int add_node(std::string op,
               std::initializer_list<std::shared_ptr<TensorData>> inputs,
               const std::shared_ptr<TensorData>& output,
               std::function<void()> backward);
  int add_node(std::string op,
               const std::vector<std::shared_ptr<TensorData>>& inputs,
               const std::shared_ptr<TensorData>& output,
               std::function<void()> backward);

  // Reverse pass from a scalar loss. Grads of every tensor recorded on this
  // tape are reset to zero first, so repeated calls on the same graph are
  // reproducible; fan-in accumulates within the pass.
  void backward(const Tensor& loss);

  std::size_t num_nodes() const { return nodes_.size(); }
  const std::string& op_name(std::size_t node) const;

  // Test hook: perturbs the first matmul backward so a gradient checker must
  // flag it. Never set outside verification paths.
  bool corrupt_matmul_backward = false;

 private:
  struct Node {
    std::string op;
    std::vector<int> inputs;
    std::function<void()> backward;
  };
  std::vector<Node> nodes_;
  std::vector<std::shared_ptr<TensorData>> tracked_;
  bool recording_ = true;
};

// ---- Elementwise kinds ----------------------------------------------------

enum class EwKind { kAdd, kSub, kMul, kRelu, kScale };

// ---- Operations -----------------------------------------------------------
// All ops read inputs eagerly, write a fresh output tensor, and (when any
// input requires grad and the graph is recording) register an exact backward.

// [m x k] * [k x n] -> [m x n]
Tensor matmul(Graph& g, const Tensor& a, const Tensor& b);

// 2-D transpose.
Tensor transpose(Graph& g, const Tensor& x);

// Binary elementwise with limited broadcasting: equal shapes, scalar (numel
// 1) operand, or a vector matching the other operand's last axis.
Tensor ew(Graph& g, EwKind kind, const Tensor& a, const Tensor& b);
// Unary relu through the same dispatch.
Tensor ew(Graph& g, EwKind kind, const Tensor& a);
// Scale by a compile-time constant (no gradient for the constant).
Tensor ew(Graph& g, EwKind kind, const Tensor& a, double c);

inline Tensor add(Graph& g, const Tensor& a, const Tensor& b) {
  return ew(g, EwKind::kAdd, a, b);
}
inline Tensor sub(Graph& g, const Tensor& a, const Tensor& b) {
  return ew(g, EwKind::kSub, a, b);
}
inline Tensor mul(Graph& g, const Tensor& a, const Tensor& b) {
  return ew(g, EwKind::kMul, a, b);
}
inline Tensor relu(Graph& g, const Tensor& a) {
  return ew(g, EwKind::kRelu, a);
}
inline Tensor scale(Graph& g, const Tensor& a, double c) {
  return ew(g, EwKind::kScale, a, c);
}

// Max-subtracted softmax along `axis`.
Tensor softmax(Graph& g, const Tensor& x, std::size_t axis);

// Per-row normalization over the last axis, then affine with gamma/beta.
Tensor layer_norm(Graph& g, const Tensor& x, const Tensor& gamma,
                  const Tensor& beta, double eps);

// Inverted dropout: zero with probability p, scale survivors by 1/(1-p).
// Identity when not training or when p == 0 (no RNG draws in either case).
Tensor dropout(Graph& g, const Tensor& x, double p, bool training, Rng& rng);

// Column slice [c0, c1) of a 2-D tensor.
Tensor slice_cols(Graph& g, const Tensor& x, std::size_t c0, std::size_t c1);

// Concatenation of 2-D tensors along columns / rows.
Tensor concat_cols(Graph& g, const std::vector<Tensor>& parts);
Tensor concat_rows(Graph& g, const std::vector<Tensor>& parts);

// Sum of all elements (scalar output).
Tensor sum(Graph& g, const Tensor& x);

// Mean of squared differences over unmasked frames. `mask` has one {0,1}
// entry per leading-axis position of pred/target.
Tensor mse_loss(Graph& g, const Tensor& pred, const Tensor& target,
                const Tensor& mask);

// Mean negative log-likelihood of the true class over unmasked frames,
// computed with a stable log-sum-exp.
Tensor cross_entropy_loss(Graph& g, const Tensor& logits,
                          const std::vector<int>& labels, const Tensor& mask);

// ---- Gradient checking ----------------------------------------------------

struct GradCheckEntry {
  std::string param;
  std::size_t coord = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_err = 0.0;
};

struct GradCheckDetail {
  GradCheckEntry worst;
  std::size_t coords_checked = 0;
};

// Central-difference oracle. `f` must rebuild the forward pass from current
// parameter values on the supplied graph and return the scalar loss; it must
// be deterministic (dropout off, fixed seeds). Returns the max over all
// coordinates of |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
double grad_check(const std::function<Tensor(Graph&)>& f,
                  const std::vector<Tensor>& params, double eps,
                  GradCheckDetail* detail = nullptr,
                  const std::vector<std::string>* param_names = nullptr);

}  // namespace artic
