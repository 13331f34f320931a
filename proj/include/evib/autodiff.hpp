#pragma once

// Minimal tape-free reverse-mode automatic differentiation over 2-D dense
// arrays. Every forward pass builds a fresh graph of shared nodes; backward()
// walks it in reverse topological order from a scalar root.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "evib/tensor.hpp"

namespace evib::ad {

struct Node {
  Tensor value;
  Tensor grad;  // same shape as value
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Pushes this node's grad into its parents' grads.
  std::function<void(Node&)> backward_fn;
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Var constant(Tensor value);
  static Var leaf(Tensor value, bool requires_grad = true);

  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Tensor& grad() const { return node_->grad; }
  Tensor& mutable_grad() { return node_->grad; }
  bool requires_grad() const { return node_->requires_grad; }
  std::size_t rows() const { return node_->value.rows(); }
  std::size_t cols() const { return node_->value.cols(); }
  double item() const;
  void zero_grad() { node_->grad.fill(0.0); }

  const std::shared_ptr<Node>& node() const { return node_; }
  bool valid() const { return node_ != nullptr; }

 private:
  std::shared_ptr<Node> node_;
};

struct Parameter {
  std::string name;
  Var var;

  // Independent copy with its own node.
  Parameter clone() const;
};

enum class UnaryKind { softplus, exp, log, square, negate, relu, tanh, sigmoid };

Var elementwise(const Var& x, UnaryKind kind);
Var softplus(const Var& x);
Var exp(const Var& x);
Var log(const Var& x);
Var square(const Var& x);
Var negate(const Var& x);
Var relu(const Var& x);
Var tanh(const Var& x);

// Elementwise map with a caller-supplied derivative. Used for special
// functions (digamma, log-gamma) that live outside this module.
Var map_elementwise(const Var& x, std::function<double(double)> f,
                    std::function<double(double)> df);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var add_scalar(const Var& a, double c);
Var scale(const Var& a, double c);

Var matmul(const Var& a, const Var& b);
// input . weights + bias, bias is 1 x out and broadcast over rows.
Var linear_combine(const Var& input, const Var& weights, const Var& bias);

// [R, 1] -> [R, cols]
Var broadcast_cols(const Var& column, std::size_t cols);
// [1, C] -> [rows, C]
Var broadcast_rows(const Var& row, std::size_t rows);
// [R, C] -> [K*R, C]; output row k*R + r copies input row r.
Var repeat_rows(const Var& x, std::size_t times);
// [R, C] -> [R, 1]
Var row_sum(const Var& x);
// Row-wise numerically stable log-softmax.
Var log_softmax_rows(const Var& x);

enum class ReduceKind { sum, mean };
Var reduce(const Var& x, ReduceKind kind);
Var sum(const Var& x);
Var mean(const Var& x);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator/(const Var& a, const Var& b) { return div(a, b); }

// Populates grads of every reachable requires_grad node. Interior grads are
// recomputed on each call; leaf grads accumulate until zeroed.
void backward(const Var& root);

// Returns the pre-clip global L2 norm; rescales all grads when it exceeds max_norm.
double clip_gradient_norm(std::span<Parameter> params, double max_norm);
void zero_gradients(std::span<Parameter> params);

enum class UpdateRule { adam, plain_gradient };

struct OptimizerState {
  UpdateRule rule = UpdateRule::adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
};

void optimizer_step(std::span<Parameter> params, OptimizerState& state, double lr);

// base * (1 + cos(pi * step / total)) / 2
double cosine_learning_rate(double base, std::uint64_t step, std::uint64_t total);

// Checkpoint format: {"<name>": {"shape": [rows, cols], "data": [...]}, ...}
std::string parameters_to_json(std::span<const Parameter> params);
std::map<std::string, Tensor> parameters_from_json(const std::string& text);
void save_parameters(std::span<const Parameter> params, const std::filesystem::path& path);
std::map<std::string, Tensor> load_parameters(const std::filesystem::path& path);

}  // namespace evib::ad
