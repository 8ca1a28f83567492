#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "nsm/common.hpp"
#include "nsm/rng.hpp"

namespace nsm {

using Shape = std::vector<int>;

inline std::size_t numel(const Shape& s) {
  std::size_t n = 1;
  for (int d : s) {
    if (d <= 0) fail(ErrorKind::shape, "non-positive dimension in shape");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ']';
  return os.str();
}

// Reverse-mode autodiff over a dynamically built tape. A Tensor is a cheap
// handle to a shared graph node; ops are free functions that append nodes.
template <typename T>
class Tensor {
 public:
  struct Node {
    Shape shape;
    std::vector<T> value;
    std::vector<T> grad;  // lazily allocated, same length as value
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward;  // accumulates into parents' grads

    std::vector<T>& ensure_grad() {
      if (grad.empty()) grad.assign(value.size(), T(0));
      return grad;
    }
  };

  Tensor() = default;

  static Tensor zeros(const Shape& shape, bool requires_grad = false) {
    return filled(shape, T(0), requires_grad);
  }

  static Tensor filled(const Shape& shape, T v, bool requires_grad = false) {
    Tensor t;
    t.n_ = std::make_shared<Node>();
    t.n_->shape = shape;
    t.n_->value.assign(numel(shape), v);
    t.n_->requires_grad = requires_grad;
    return t;
  }

  static Tensor from_data(const Shape& shape, std::vector<T> data,
                          bool requires_grad = false) {
    if (numel(shape) != data.size())
      fail(ErrorKind::shape, "data length " + std::to_string(data.size()) +
                                 " does not match shape " + shape_str(shape));
    Tensor t;
    t.n_ = std::make_shared<Node>();
    t.n_->shape = shape;
    t.n_->value = std::move(data);
    t.n_->requires_grad = requires_grad;
    return t;
  }

  static Tensor scalar(T v, bool requires_grad = false) {
    return from_data({1}, {v}, requires_grad);
  }

  // Seeded normal init (conv weights use std 0.02 by convention here).
  static Tensor randn(const Shape& shape, Rng& rng, T stddev = T(1),
                      bool requires_grad = true) {
    std::normal_distribution<double> dist(0.0, 1.0);
    std::vector<T> data(numel(shape));
    for (auto& v : data) v = static_cast<T>(dist(rng)) * stddev;
    return from_data(shape, std::move(data), requires_grad);
  }

  bool defined() const { return n_ != nullptr; }
  const Shape& shape() const { return n_->shape; }
  std::size_t size() const { return n_->value.size(); }
  std::vector<T>& data() { return n_->value; }
  const std::vector<T>& data() const { return n_->value; }
  std::vector<T>& grad() { return n_->ensure_grad(); }
  const std::vector<T>& grad_raw() const { return n_->grad; }
  bool requires_grad() const { return n_->requires_grad; }
  void set_requires_grad(bool rg) { n_->requires_grad = rg; }
  std::shared_ptr<Node> node() const { return n_; }

  T item() const {
    if (n_->value.size() != 1)
      fail(ErrorKind::shape, "item() on non-scalar tensor " + shape_str(n_->shape));
    return n_->value[0];
  }

  void zero_grad() { n_->grad.clear(); }

  // Value copy cut off from the graph.
  Tensor detach() const { return from_data(n_->shape, n_->value, false); }

  bool all_finite() const {
    for (T v : n_->value)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  // Backpropagate from this scalar. Topological order over the tape, each
  // node's backward runs exactly once.
  void backward() {
    if (n_->value.size() != 1)
      fail(ErrorKind::shape, "backward() requires a scalar root");
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack{{n_.get(), 0}};
    seen.insert(n_.get());
    while (!stack.empty()) {
      auto& [node, idx] = stack.back();
      if (idx < node->parents.size()) {
        Node* p = node->parents[idx++].get();
        if (seen.insert(p).second) stack.emplace_back(p, 0);
      } else {
        order.push_back(node);
        stack.pop_back();
      }
    }
    n_->ensure_grad();
    n_->grad[0] = T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      Node* node = *it;
      if (node->backward && !node->grad.empty()) node->backward(*node);
    }
  }

  // Builder used by op implementations.
  static Tensor make_op(Shape shape, std::vector<T> value,
                        std::vector<Tensor> parents,
                        std::function<void(Node&)> backward) {
    Tensor t;
    t.n_ = std::make_shared<Node>();
    t.n_->shape = std::move(shape);
    t.n_->value = std::move(value);
    bool rg = false;
    for (auto& p : parents) {
      rg = rg || p.requires_grad() || p.n_->backward || !p.n_->parents.empty();
      t.n_->parents.push_back(p.n_);
    }
    if (rg) t.n_->backward = std::move(backward);
    return t;
  }

 private:
  std::shared_ptr<Node> n_;
};

template <typename T>
inline void check_same_shape(const Tensor<T>& a, const Tensor<T>& b,
                             const char* op) {
  if (a.shape() != b.shape())
    fail(ErrorKind::shape, std::string(op) + ": shape mismatch " +
                               shape_str(a.shape()) + " vs " +
                               shape_str(b.shape()));
}

// ---- elementwise ----

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a, b, "add");
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  return Tensor<T>::make_op(a.shape(), std::move(out), {a, b},
                            [](typename Tensor<T>::Node& n) {
                              auto& ga = n.parents[0]->ensure_grad();
                              auto& gb = n.parents[1]->ensure_grad();
                              for (std::size_t i = 0; i < n.grad.size(); ++i) {
                                ga[i] += n.grad[i];
                                gb[i] += n.grad[i];
                              }
                            });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a, b, "sub");
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  return Tensor<T>::make_op(a.shape(), std::move(out), {a, b},
                            [](typename Tensor<T>::Node& n) {
                              auto& ga = n.parents[0]->ensure_grad();
                              auto& gb = n.parents[1]->ensure_grad();
                              for (std::size_t i = 0; i < n.grad.size(); ++i) {
                                ga[i] += n.grad[i];
                                gb[i] -= n.grad[i];
                              }
                            });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a, b, "mul");
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  return Tensor<T>::make_op(a.shape(), std::move(out), {a, b},
                            [](typename Tensor<T>::Node& n) {
                              auto& pa = n.parents[0];
                              auto& pb = n.parents[1];
                              auto& ga = pa->ensure_grad();
                              auto& gb = pb->ensure_grad();
                              for (std::size_t i = 0; i < n.grad.size(); ++i) {
                                ga[i] += n.grad[i] * pb->value[i];
                                gb[i] += n.grad[i] * pa->value[i];
                              }
                            });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T k) {
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * k;
  return Tensor<T>::make_op(a.shape(), std::move(out), {a},
                            [k](typename Tensor<T>::Node& n) {
                              auto& ga = n.parents[0]->ensure_grad();
                              for (std::size_t i = 0; i < n.grad.size(); ++i)
                                ga[i] += n.grad[i] * k;
                            });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T k) {
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + k;
  return Tensor<T>::make_op(a.shape(), std::move(out), {a},
                            [](typename Tensor<T>::Node& n) {
                              auto& ga = n.parents[0]->ensure_grad();
                              for (std::size_t i = 0; i < n.grad.size(); ++i)
                                ga[i] += n.grad[i];
                            });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = a.data()[i] > T(0) ? a.data()[i] : T(0);
  return Tensor<T>::make_op(a.shape(), std::move(out), {a},
                            [](typename Tensor<T>::Node& n) {
                              auto& p = n.parents[0];
                              auto& g = p->ensure_grad();
                              for (std::size_t i = 0; i < n.grad.size(); ++i)
                                if (p->value[i] > T(0)) g[i] += n.grad[i];
                            });
}

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& a, T slope) {
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = a.data()[i] > T(0) ? a.data()[i] : slope * a.data()[i];
  return Tensor<T>::make_op(a.shape(), std::move(out), {a},
                            [slope](typename Tensor<T>::Node& n) {
                              auto& p = n.parents[0];
                              auto& g = p->ensure_grad();
                              for (std::size_t i = 0; i < n.grad.size(); ++i)
                                g[i] += n.grad[i] *
                                        (p->value[i] > T(0) ? T(1) : slope);
                            });
}

template <typename T>
Tensor<T> tanh_op(const Tensor<T>& a) {
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(a.data()[i]);
  return Tensor<T>::make_op(a.shape(), std::move(out), {a},
                            [](typename Tensor<T>::Node& n) {
                              auto& g = n.parents[0]->ensure_grad();
                              for (std::size_t i = 0; i < n.grad.size(); ++i)
                                g[i] += n.grad[i] *
                                        (T(1) - n.value[i] * n.value[i]);
                            });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a) {
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = T(1) / (T(1) + std::exp(-a.data()[i]));
  return Tensor<T>::make_op(a.shape(), std::move(out), {a},
                            [](typename Tensor<T>::Node& n) {
                              auto& g = n.parents[0]->ensure_grad();
                              for (std::size_t i = 0; i < n.grad.size(); ++i)
                                g[i] += n.grad[i] * n.value[i] *
                                        (T(1) - n.value[i]);
                            });
}

template <typename T>
Tensor<T> log_op(const Tensor<T>& a, T eps = T(1e-12)) {
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = std::log(a.data()[i] + eps);
  return Tensor<T>::make_op(a.shape(), std::move(out), {a},
                            [eps](typename Tensor<T>::Node& n) {
                              auto& p = n.parents[0];
                              auto& g = p->ensure_grad();
                              for (std::size_t i = 0; i < n.grad.size(); ++i)
                                g[i] += n.grad[i] / (p->value[i] + eps);
                            });
}

// ---- reductions ----

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  T s = std::accumulate(a.data().begin(), a.data().end(), T(0));
  return Tensor<T>::make_op({1}, {s}, {a},
                            [](typename Tensor<T>::Node& n) {
                              auto& g = n.parents[0]->ensure_grad();
                              for (auto& gi : g) gi += n.grad[0];
                            });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
  T s = std::accumulate(a.data().begin(), a.data().end(), T(0));
  T inv = T(1) / static_cast<T>(a.size());
  return Tensor<T>::make_op({1}, {s * inv}, {a},
                            [inv](typename Tensor<T>::Node& n) {
                              auto& g = n.parents[0]->ensure_grad();
                              for (auto& gi : g) gi += n.grad[0] * inv;
                            });
}

// mean(|a - b|), subgradient 0 at ties
template <typename T>
Tensor<T> l1_distance(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a, b, "l1_distance");
  T s = T(0);
  for (std::size_t i = 0; i < a.size(); ++i)
    s += std::abs(a.data()[i] - b.data()[i]);
  T inv = T(1) / static_cast<T>(a.size());
  return Tensor<T>::make_op(
      {1}, {s * inv}, {a, b}, [inv](typename Tensor<T>::Node& n) {
        auto& pa = n.parents[0];
        auto& pb = n.parents[1];
        auto& ga = pa->ensure_grad();
        auto& gb = pb->ensure_grad();
        for (std::size_t i = 0; i < ga.size(); ++i) {
          T d = pa->value[i] - pb->value[i];
          T sgn = d > T(0) ? T(1) : (d < T(0) ? T(-1) : T(0));
          ga[i] += n.grad[0] * inv * sgn;
          gb[i] -= n.grad[0] * inv * sgn;
        }
      });
}

// sum((a - b)^2)
template <typename T>
Tensor<T> squared_l2_distance(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a, b, "squared_l2_distance");
  T s = T(0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    T d = a.data()[i] - b.data()[i];
    s += d * d;
  }
  return Tensor<T>::make_op(
      {1}, {s}, {a, b}, [](typename Tensor<T>::Node& n) {
        auto& pa = n.parents[0];
        auto& pb = n.parents[1];
        auto& ga = pa->ensure_grad();
        auto& gb = pb->ensure_grad();
        for (std::size_t i = 0; i < ga.size(); ++i) {
          T d = T(2) * (pa->value[i] - pb->value[i]);
          ga[i] += n.grad[0] * d;
          gb[i] -= n.grad[0] * d;
        }
      });
}

template <typename T>
Tensor<T> mse(const Tensor<T>& a, const Tensor<T>& b) {
  return scale(squared_l2_distance(a, b), T(1) / static_cast<T>(a.size()));
}

}  // namespace nsm
