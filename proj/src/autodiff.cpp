#include "evib/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>
#include <utility>

#include <json.hpp>

#include "evib/error.hpp"

namespace evib::ad {
namespace {

using NodePtr = std::shared_ptr<Node>;

Var make_node(Tensor value, std::vector<NodePtr> parents, std::function<void(Node&)> fn) {
  auto node = std::make_shared<Node>();
  node->grad = Tensor(value.rows(), value.cols(), 0.0);
  node->value = std::move(value);
  node->requires_grad =
      std::any_of(parents.begin(), parents.end(), [](const NodePtr& p) { return p->requires_grad; });
  if (node->requires_grad) {
    node->parents = std::move(parents);
    node->backward_fn = std::move(fn);
  }
  return Var(std::move(node));
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (!a.value().same_shape(b.value())) {
    std::ostringstream msg;
    msg << op << ": shape mismatch " << a.value().shape_string() << " vs "
        << b.value().shape_string();
    throw DimensionError(msg.str());
  }
}

double softplus_scalar(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid_scalar(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var Var::constant(Tensor value) { return leaf(std::move(value), false); }

Var Var::leaf(Tensor value, bool requires_grad) {
  auto node = std::make_shared<Node>();
  node->grad = Tensor(value.rows(), value.cols(), 0.0);
  node->value = std::move(value);
  node->requires_grad = requires_grad;
  return Var(std::move(node));
}

double Var::item() const {
  if (value().size() != 1) {
    throw ContractViolation("item() on non-scalar node of shape " + value().shape_string());
  }
  return value()[0];
}

Parameter Parameter::clone() const {
  return Parameter{name, Var::leaf(var.value(), var.requires_grad())};
}

Var elementwise(const Var& x, UnaryKind kind) {
  const Tensor& in = x.value();
  Tensor out(in.rows(), in.cols());
  const std::size_t n = in.size();
  switch (kind) {
    case UnaryKind::softplus:
      for (std::size_t i = 0; i < n; ++i) out[i] = softplus_scalar(in[i]);
      break;
    case UnaryKind::exp:
      for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(in[i]);
      break;
    case UnaryKind::log:
      for (std::size_t i = 0; i < n; ++i) {
        if (!(in[i] > 0.0)) {
          std::ostringstream msg;
          msg << "log of non-positive value " << in[i] << " at index " << i << " (row "
              << i / std::max<std::size_t>(in.cols(), 1) << ", col "
              << i % std::max<std::size_t>(in.cols(), 1) << ")";
          throw DomainError(msg.str());
        }
        out[i] = std::log(in[i]);
      }
      break;
    case UnaryKind::square:
      for (std::size_t i = 0; i < n; ++i) out[i] = in[i] * in[i];
      break;
    case UnaryKind::negate:
      for (std::size_t i = 0; i < n; ++i) out[i] = -in[i];
      break;
    case UnaryKind::relu:
      for (std::size_t i = 0; i < n; ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
      break;
    case UnaryKind::tanh:
      for (std::size_t i = 0; i < n; ++i) out[i] = std::tanh(in[i]);
      break;
    case UnaryKind::sigmoid:
      for (std::size_t i = 0; i < n; ++i) out[i] = sigmoid_scalar(in[i]);
      break;
  }

  return make_node(std::move(out), {x.node()}, [kind](Node& self) {
    Node& p = *self.parents[0];
    const std::size_t n = self.value.size();
    for (std::size_t i = 0; i < n; ++i) {
      const double g = self.grad[i];
      const double xi = p.value[i];
      double d = 0.0;
      switch (kind) {
        case UnaryKind::softplus: d = sigmoid_scalar(xi); break;
        case UnaryKind::exp: d = self.value[i]; break;
        case UnaryKind::log: d = 1.0 / xi; break;
        case UnaryKind::square: d = 2.0 * xi; break;
        case UnaryKind::negate: d = -1.0; break;
        case UnaryKind::relu: d = xi > 0.0 ? 1.0 : 0.0; break;
        case UnaryKind::tanh: d = 1.0 - self.value[i] * self.value[i]; break;
        case UnaryKind::sigmoid: d = self.value[i] * (1.0 - self.value[i]); break;
      }
      p.grad[i] += g * d;
    }
  });
}

Var softplus(const Var& x) { return elementwise(x, UnaryKind::softplus); }
Var exp(const Var& x) { return elementwise(x, UnaryKind::exp); }
Var log(const Var& x) { return elementwise(x, UnaryKind::log); }
Var square(const Var& x) { return elementwise(x, UnaryKind::square); }
Var negate(const Var& x) { return elementwise(x, UnaryKind::negate); }
Var relu(const Var& x) { return elementwise(x, UnaryKind::relu); }
Var tanh(const Var& x) { return elementwise(x, UnaryKind::tanh); }

Var map_elementwise(const Var& x, std::function<double(double)> f,
                    std::function<double(double)> df) {
  const Tensor& in = x.value();
  Tensor out(in.rows(), in.cols());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  return make_node(std::move(out), {x.node()}, [df = std::move(df)](Node& self) {
    Node& p = *self.parents[0];
    for (std::size_t i = 0; i < self.value.size(); ++i) p.grad[i] += self.grad[i] * df(p.value[i]);
  });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Tensor out = a.value();
  out.add_scaled(b.value());
  return make_node(std::move(out), {a.node(), b.node()}, [](Node& self) {
    for (auto& p : self.parents) {
      if (p->requires_grad) p->grad.add_scaled(self.grad);
    }
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  Tensor out = a.value();
  out.add_scaled(b.value(), -1.0);
  return make_node(std::move(out), {a.node(), b.node()}, [](Node& self) {
    if (self.parents[0]->requires_grad) self.parents[0]->grad.add_scaled(self.grad);
    if (self.parents[1]->requires_grad) self.parents[1]->grad.add_scaled(self.grad, -1.0);
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  Tensor out(a.rows(), a.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
  return make_node(std::move(out), {a.node(), b.node()}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    for (std::size_t i = 0; i < self.value.size(); ++i) {
      if (pa.requires_grad) pa.grad[i] += self.grad[i] * pb.value[i];
      if (pb.requires_grad) pb.grad[i] += self.grad[i] * pa.value[i];
    }
  });
}

Var div(const Var& a, const Var& b) {
  require_same_shape(a, b, "div");
  Tensor out(a.rows(), a.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] / b.value()[i];
  return make_node(std::move(out), {a.node(), b.node()}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    for (std::size_t i = 0; i < self.value.size(); ++i) {
      const double inv = 1.0 / pb.value[i];
      if (pa.requires_grad) pa.grad[i] += self.grad[i] * inv;
      if (pb.requires_grad) pb.grad[i] -= self.grad[i] * self.value[i] * inv;
    }
  });
}

Var add_scalar(const Var& a, double c) {
  Tensor out = a.value();
  for (auto& v : out.data()) v += c;
  return make_node(std::move(out), {a.node()},
                   [](Node& self) { self.parents[0]->grad.add_scaled(self.grad); });
}

Var scale(const Var& a, double c) {
  Tensor out = a.value();
  for (auto& v : out.data()) v *= c;
  return make_node(std::move(out), {a.node()},
                   [c](Node& self) { self.parents[0]->grad.add_scaled(self.grad, c); });
}

Var matmul(const Var& a, const Var& b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.cols() != B.rows()) {
    throw DimensionError("matmul: inner dimensions disagree, " + A.shape_string() + " . " +
                         B.shape_string());
  }
  const std::size_t n = A.rows(), k = A.cols(), m = B.cols();
  Tensor out(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = A(i, p);
      for (std::size_t j = 0; j < m; ++j) out(i, j) += aip * B(p, j);
    }
  }
  return make_node(std::move(out), {a.node(), b.node()}, [n, k, m](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    const Tensor& G = self.grad;
    if (pa.requires_grad) {
      // dA = G . B^T
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double s = 0.0;
          for (std::size_t j = 0; j < m; ++j) s += G(i, j) * pb.value(p, j);
          pa.grad(i, p) += s;
        }
    }
    if (pb.requires_grad) {
      // dB = A^T . G
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = pa.value(i, p);
          for (std::size_t j = 0; j < m; ++j) pb.grad(p, j) += aip * G(i, j);
        }
    }
  });
}

Var linear_combine(const Var& input, const Var& weights, const Var& bias) {
  if (input.cols() != weights.rows() || bias.rows() != 1 || bias.cols() != weights.cols()) {
    throw DimensionError("linear_combine: input " + input.value().shape_string() + ", weights " +
                         weights.value().shape_string() + ", bias " +
                         bias.value().shape_string());
  }
  return add(matmul(input, weights), broadcast_rows(bias, input.rows()));
}

Var broadcast_cols(const Var& column, std::size_t cols) {
  if (column.cols() != 1) {
    throw DimensionError("broadcast_cols expects [R, 1], got " + column.value().shape_string());
  }
  const std::size_t rows = column.rows();
  Tensor out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out(r, c) = column.value()[r];
  return make_node(std::move(out), {column.node()}, [rows, cols](Node& self) {
    Node& p = *self.parents[0];
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) p.grad[r] += self.grad(r, c);
  });
}

Var broadcast_rows(const Var& row, std::size_t rows) {
  if (row.rows() != 1) {
    throw DimensionError("broadcast_rows expects [1, C], got " + row.value().shape_string());
  }
  const std::size_t cols = row.cols();
  Tensor out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out(r, c) = row.value()[c];
  return make_node(std::move(out), {row.node()}, [rows, cols](Node& self) {
    Node& p = *self.parents[0];
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) p.grad[c] += self.grad(r, c);
  });
}

Var repeat_rows(const Var& x, std::size_t times) {
  if (times == 0) throw ConfigError("repeat_rows: times must be positive");
  const std::size_t rows = x.rows(), cols = x.cols();
  Tensor out(rows * times, cols);
  for (std::size_t k = 0; k < times; ++k)
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) out(k * rows + r, c) = x.value()(r, c);
  return make_node(std::move(out), {x.node()}, [rows, cols, times](Node& self) {
    Node& p = *self.parents[0];
    for (std::size_t k = 0; k < times; ++k)
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) p.grad(r, c) += self.grad(k * rows + r, c);
  });
}

Var row_sum(const Var& x) {
  const std::size_t rows = x.rows(), cols = x.cols();
  Tensor out(rows, 1);
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += x.value()(r, c);
    out[r] = s;
  }
  return make_node(std::move(out), {x.node()}, [rows, cols](Node& self) {
    Node& p = *self.parents[0];
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) p.grad(r, c) += self.grad[r];
  });
}

Var log_softmax_rows(const Var& x) {
  const std::size_t rows = x.rows(), cols = x.cols();
  Tensor out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    auto in = x.value().row_span(r);
    const double mx = *std::max_element(in.begin(), in.end());
    double s = 0.0;
    for (double v : in) s += std::exp(v - mx);
    const double lse = mx + std::log(s);
    for (std::size_t c = 0; c < cols; ++c) out(r, c) = in[c] - lse;
  }
  return make_node(std::move(out), {x.node()}, [rows, cols](Node& self) {
    Node& p = *self.parents[0];
    for (std::size_t r = 0; r < rows; ++r) {
      double gsum = 0.0;
      for (std::size_t c = 0; c < cols; ++c) gsum += self.grad(r, c);
      for (std::size_t c = 0; c < cols; ++c)
        p.grad(r, c) += self.grad(r, c) - std::exp(self.value(r, c)) * gsum;
    }
  });
}

Var reduce(const Var& x, ReduceKind kind) {
  const std::size_t n = x.value().size();
  if (n == 0) throw DomainError("empty reduction");
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  const double factor = kind == ReduceKind::mean ? 1.0 / static_cast<double>(n) : 1.0;
  return make_node(Tensor::scalar(s * factor), {x.node()}, [factor](Node& self) {
    Node& p = *self.parents[0];
    const double g = self.grad[0] * factor;
    for (auto& v : p.grad.data()) v += g;
  });
}

Var sum(const Var& x) { return reduce(x, ReduceKind::sum); }
Var mean(const Var& x) { return reduce(x, ReduceKind::mean); }

void backward(const Var& root) {
  if (!root.valid() || root.value().size() != 1) {
    throw ContractViolation("backward requires a scalar root, got shape " +
                            (root.valid() ? root.value().shape_string() : std::string("null")));
  }
  if (!root.requires_grad()) return;

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* n : order) {
    if (!n->parents.empty()) n->grad.fill(0.0);
  }
  root.node()->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn) n->backward_fn(*n);
  }
}

double clip_gradient_norm(std::span<Parameter> params, double max_norm) {
  if (!(max_norm > 0.0)) throw ConfigError("clip_gradient_norm: max_norm must be positive");
  double sq = 0.0;
  for (const auto& p : params) sq += p.var.grad().squared_norm();
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double factor = max_norm / norm;
    for (auto& p : params)
      for (auto& g : p.var.mutable_grad().data()) g *= factor;
  }
  return norm;
}

void zero_gradients(std::span<Parameter> params) {
  for (auto& p : params) p.var.zero_grad();
}

void optimizer_step(std::span<Parameter> params, OptimizerState& state, double lr) {
  if (!(lr > 0.0)) throw ConfigError("optimizer_step: learning rate must be positive");
  ++state.step;
  if (state.rule == UpdateRule::plain_gradient) {
    for (auto& p : params) p.var.mutable_value().add_scaled(p.var.grad(), -lr);
    return;
  }
  if (state.first_moment.size() != params.size()) {
    state.first_moment.clear();
    state.second_moment.clear();
    for (const auto& p : params) {
      state.first_moment.emplace_back(p.var.rows(), p.var.cols(), 0.0);
      state.second_moment.emplace_back(p.var.rows(), p.var.cols(), 0.0);
    }
  }
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(state.beta1, t);
  const double bias2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& w = params[i].var.mutable_value();
    const Tensor& g = params[i].var.grad();
    Tensor& m = state.first_moment[i];
    Tensor& v = state.second_moment[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
      const double mhat = m[j] / bias1;
      const double vhat = v[j] / bias2;
      w[j] -= lr * mhat / (std::sqrt(vhat) + state.epsilon);
    }
  }
}

double cosine_learning_rate(double base, std::uint64_t step, std::uint64_t total) {
  if (total == 0) return base;
  const double frac = std::min(1.0, static_cast<double>(step) / static_cast<double>(total));
  return base * (1.0 + std::cos(M_PI * frac)) / 2.0;
}

std::string parameters_to_json(std::span<const Parameter> params) {
  nlohmann::ordered_json doc = nlohmann::ordered_json::object();
  std::unordered_set<std::string> seen;
  for (const auto& p : params) {
    if (!seen.insert(p.name).second) throw ConfigError("duplicate parameter name '" + p.name + "'");
    nlohmann::ordered_json entry;
    entry["shape"] = {p.var.rows(), p.var.cols()};
    entry["data"] = p.var.value().storage();
    doc[p.name] = std::move(entry);
  }
  return doc.dump();
}

std::map<std::string, Tensor> parameters_from_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("checkpoint parse error at byte ") + std::to_string(e.byte) +
                     ": " + e.what());
  }
  if (!doc.is_object()) throw ParseError("checkpoint root must be a JSON object");
  std::map<std::string, Tensor> out;
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    const auto& entry = it.value();
    try {
      const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
      auto data = entry.at("data").get<std::vector<double>>();
      if (shape.size() != 2) throw ParseError("shape must have two entries");
      out.emplace(it.key(), Tensor(shape[0], shape[1], std::move(data)));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("checkpoint parameter '" + it.key() + "': " + e.what());
    } catch (const DimensionError& e) {
      throw ParseError("checkpoint parameter '" + it.key() + "': " + e.what());
    }
  }
  return out;
}

void save_parameters(std::span<const Parameter> params, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << parameters_to_json(params) << '\n';
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::map<std::string, Tensor> load_parameters(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parameters_from_json(buf.str());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace evib::ad
