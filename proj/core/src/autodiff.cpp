#include "rldyn/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace rldyn::ad {

namespace {

NodePtr make_node(Matrix value, std::vector<NodePtr> parents,
                  std::function<void(Node&)> backward_fn) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->parents = std::move(parents);
  for (const auto& p : n->parents) {
    if (p->requires_grad) {
      n->requires_grad = true;
      break;
    }
  }
  if (n->requires_grad) n->backward_fn = std::move(backward_fn);
  return n;
}

double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) {
  // log(1 + e^x), overflow-safe on both sides.
  if (x > 30.0) return x;
  return std::log1p(std::exp(x));
}

}  // namespace

NodePtr constant(Matrix value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return n;
}

NodePtr leaf(Matrix value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = true;
  return n;
}

NodePtr linear(const NodePtr& x, const NodePtr& W, const NodePtr& b) {
  const Matrix& xv = x->value;
  const Matrix& wv = W->value;
  const Matrix& bv = b->value;
  if (xv.cols != wv.rows) {
    throw std::invalid_argument("linear: x is " + std::to_string(xv.rows) + "x" +
                                std::to_string(xv.cols) + " but W is " +
                                std::to_string(wv.rows) + "x" +
                                std::to_string(wv.cols));
  }
  if (bv.rows != 1 || bv.cols != wv.cols) {
    throw std::invalid_argument("linear: bias must be 1x" +
                                std::to_string(wv.cols));
  }
  Matrix out = matmul(xv, wv);
  for (std::size_t i = 0; i < out.rows; ++i)
    for (std::size_t j = 0; j < out.cols; ++j) out(i, j) += bv(0, j);

  return make_node(std::move(out), {x, W, b}, [](Node& self) {
    const NodePtr& x = self.parents[0];
    const NodePtr& W = self.parents[1];
    const NodePtr& b = self.parents[2];
    const Matrix& g = self.grad;
    if (x->requires_grad) {
      x->ensure_grad();
      Matrix dx = matmul(g, transpose(W->value));
      for (std::size_t i = 0; i < dx.size(); ++i) x->grad.data[i] += dx.data[i];
    }
    if (W->requires_grad) {
      W->ensure_grad();
      Matrix dw = matmul(transpose(x->value), g);
      for (std::size_t i = 0; i < dw.size(); ++i) W->grad.data[i] += dw.data[i];
    }
    if (b->requires_grad) {
      b->ensure_grad();
      for (std::size_t i = 0; i < g.rows; ++i)
        for (std::size_t j = 0; j < g.cols; ++j) b->grad(0, j) += g(i, j);
    }
  });
}

NodePtr activation(const NodePtr& x, Activation kind) {
  const Matrix& xv = x->value;
  Matrix out(xv.rows, xv.cols);
  switch (kind) {
    case Activation::relu:
      for (std::size_t i = 0; i < xv.size(); ++i)
        out.data[i] = xv.data[i] > 0.0 ? xv.data[i] : 0.0;
      break;
    case Activation::tanh:
      for (std::size_t i = 0; i < xv.size(); ++i) out.data[i] = std::tanh(xv.data[i]);
      break;
    case Activation::softplus:
      for (std::size_t i = 0; i < xv.size(); ++i) out.data[i] = softplus(xv.data[i]);
      break;
  }
  return make_node(std::move(out), {x}, [kind](Node& self) {
    const NodePtr& x = self.parents[0];
    if (!x->requires_grad) return;
    x->ensure_grad();
    const Matrix& g = self.grad;
    switch (kind) {
      case Activation::relu:
        for (std::size_t i = 0; i < g.size(); ++i)
          x->grad.data[i] += x->value.data[i] > 0.0 ? g.data[i] : 0.0;
        break;
      case Activation::tanh:
        for (std::size_t i = 0; i < g.size(); ++i) {
          double y = self.value.data[i];
          x->grad.data[i] += g.data[i] * (1.0 - y * y);
        }
        break;
      case Activation::softplus:
        for (std::size_t i = 0; i < g.size(); ++i)
          x->grad.data[i] += g.data[i] * sigmoid(x->value.data[i]);
        break;
    }
  });
}

NodePtr log_softmax(const NodePtr& logits) {
  const Matrix& xv = logits->value;
  if (xv.cols < 1) throw std::invalid_argument("log_softmax: needs >= 1 column");
  Matrix out(xv.rows, xv.cols);
  for (std::size_t i = 0; i < xv.rows; ++i) {
    double mx = xv(i, 0);
    for (std::size_t j = 1; j < xv.cols; ++j) mx = std::max(mx, xv(i, j));
    double sum = 0.0;
    for (std::size_t j = 0; j < xv.cols; ++j) sum += std::exp(xv(i, j) - mx);
    double lse = mx + std::log(sum);
    for (std::size_t j = 0; j < xv.cols; ++j) out(i, j) = xv(i, j) - lse;
  }
  return make_node(std::move(out), {logits}, [](Node& self) {
    const NodePtr& x = self.parents[0];
    if (!x->requires_grad) return;
    x->ensure_grad();
    const Matrix& g = self.grad;
    // dx = g - softmax(x) * rowsum(g)
    for (std::size_t i = 0; i < g.rows; ++i) {
      double gsum = 0.0;
      for (std::size_t j = 0; j < g.cols; ++j) gsum += g(i, j);
      for (std::size_t j = 0; j < g.cols; ++j) {
        double p = std::exp(self.value(i, j));
        x->grad(i, j) += g(i, j) - p * gsum;
      }
    }
  });
}

NodePtr reduce(const NodePtr& x, Reduce op) {
  const Matrix& xv = x->value;
  if (xv.empty()) throw std::invalid_argument("reduce: empty matrix");
  double s = 0.0;
  for (double v : xv.data) s += v;
  Matrix out(1, 1);
  out.data[0] = op == Reduce::sum ? s : s / static_cast<double>(xv.size());
  return make_node(std::move(out), {x}, [op](Node& self) {
    const NodePtr& x = self.parents[0];
    if (!x->requires_grad) return;
    x->ensure_grad();
    double g = self.grad.data[0];
    if (op == Reduce::mean) g /= static_cast<double>(x->value.size());
    for (std::size_t i = 0; i < x->grad.size(); ++i) x->grad.data[i] += g;
  });
}

NodePtr row_sum(const NodePtr& x) {
  const Matrix& xv = x->value;
  Matrix out(xv.rows, 1);
  for (std::size_t i = 0; i < xv.rows; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < xv.cols; ++j) s += xv(i, j);
    out(i, 0) = s;
  }
  return make_node(std::move(out), {x}, [](Node& self) {
    const NodePtr& x = self.parents[0];
    if (!x->requires_grad) return;
    x->ensure_grad();
    for (std::size_t i = 0; i < x->value.rows; ++i)
      for (std::size_t j = 0; j < x->value.cols; ++j)
        x->grad(i, j) += self.grad(i, 0);
  });
}

NodePtr gather_cols(const NodePtr& x, const std::vector<std::size_t>& idx) {
  const Matrix& xv = x->value;
  if (idx.size() != xv.rows) {
    throw std::invalid_argument("gather_cols: need one index per row");
  }
  Matrix out(xv.rows, 1);
  for (std::size_t i = 0; i < xv.rows; ++i) {
    if (idx[i] >= xv.cols) throw std::invalid_argument("gather_cols: index out of range");
    out(i, 0) = xv(i, idx[i]);
  }
  return make_node(std::move(out), {x}, [idx](Node& self) {
    const NodePtr& x = self.parents[0];
    if (!x->requires_grad) return;
    x->ensure_grad();
    for (std::size_t i = 0; i < idx.size(); ++i)
      x->grad(i, idx[i]) += self.grad(i, 0);
  });
}

NodePtr add(const NodePtr& a, const NodePtr& b) {
  require_same_shape(a->value, b->value, "add");
  Matrix out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += b->value.data[i];
  return make_node(std::move(out), {a, b}, [](Node& self) {
    for (int k = 0; k < 2; ++k) {
      const NodePtr& p = self.parents[k];
      if (!p->requires_grad) continue;
      p->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        p->grad.data[i] += self.grad.data[i];
    }
  });
}

NodePtr sub(const NodePtr& a, const NodePtr& b) {
  require_same_shape(a->value, b->value, "sub");
  Matrix out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] -= b->value.data[i];
  return make_node(std::move(out), {a, b}, [](Node& self) {
    const NodePtr& a = self.parents[0];
    const NodePtr& b = self.parents[1];
    if (a->requires_grad) {
      a->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        a->grad.data[i] += self.grad.data[i];
    }
    if (b->requires_grad) {
      b->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        b->grad.data[i] -= self.grad.data[i];
    }
  });
}

NodePtr mul(const NodePtr& a, const NodePtr& b) {
  require_same_shape(a->value, b->value, "mul");
  Matrix out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= b->value.data[i];
  return make_node(std::move(out), {a, b}, [](Node& self) {
    const NodePtr& a = self.parents[0];
    const NodePtr& b = self.parents[1];
    if (a->requires_grad) {
      a->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        a->grad.data[i] += self.grad.data[i] * b->value.data[i];
    }
    if (b->requires_grad) {
      b->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        b->grad.data[i] += self.grad.data[i] * a->value.data[i];
    }
  });
}

NodePtr div(const NodePtr& a, const NodePtr& b) {
  require_same_shape(a->value, b->value, "div");
  Matrix out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] /= b->value.data[i];
  return make_node(std::move(out), {a, b}, [](Node& self) {
    const NodePtr& a = self.parents[0];
    const NodePtr& b = self.parents[1];
    if (a->requires_grad) {
      a->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        a->grad.data[i] += self.grad.data[i] / b->value.data[i];
    }
    if (b->requires_grad) {
      b->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        double bv = b->value.data[i];
        b->grad.data[i] -= self.grad.data[i] * a->value.data[i] / (bv * bv);
      }
    }
  });
}

NodePtr exp(const NodePtr& x) {
  Matrix out = x->value;
  for (double& v : out.data) v = std::exp(v);
  return make_node(std::move(out), {x}, [](Node& self) {
    const NodePtr& x = self.parents[0];
    if (!x->requires_grad) return;
    x->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      x->grad.data[i] += self.grad.data[i] * self.value.data[i];
  });
}

NodePtr log(const NodePtr& x) {
  Matrix out = x->value;
  for (double& v : out.data) v = std::log(v);
  return make_node(std::move(out), {x}, [](Node& self) {
    const NodePtr& x = self.parents[0];
    if (!x->requires_grad) return;
    x->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      x->grad.data[i] += self.grad.data[i] / x->value.data[i];
  });
}

NodePtr neg(const NodePtr& x) { return scale(x, -1.0); }

NodePtr scale(const NodePtr& x, double c) {
  Matrix out = x->value;
  for (double& v : out.data) v *= c;
  return make_node(std::move(out), {x}, [c](Node& self) {
    const NodePtr& x = self.parents[0];
    if (!x->requires_grad) return;
    x->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      x->grad.data[i] += c * self.grad.data[i];
  });
}

NodePtr add_scalar(const NodePtr& x, double c) {
  Matrix out = x->value;
  for (double& v : out.data) v += c;
  return make_node(std::move(out), {x}, [](Node& self) {
    const NodePtr& x = self.parents[0];
    if (!x->requires_grad) return;
    x->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      x->grad.data[i] += self.grad.data[i];
  });
}

NodePtr square(const NodePtr& x) { return mul(x, x); }

NodePtr softmax_cross_entropy(const NodePtr& logits, const Matrix& target_probs) {
  require_same_shape(logits->value, target_probs, "softmax_cross_entropy");
  NodePtr lsm = log_softmax(logits);  // detached: only its value is used here
  const Matrix& lv = lsm->value;
  Matrix out(lv.rows, 1);
  for (std::size_t i = 0; i < lv.rows; ++i) {
    double ce = 0.0;
    for (std::size_t j = 0; j < lv.cols; ++j) ce -= target_probs(i, j) * lv(i, j);
    out(i, 0) = ce;
  }
  Matrix lsm_copy = lv;
  Matrix targets = target_probs;
  return make_node(std::move(out), {logits}, [lsm_copy, targets](Node& self) {
    const NodePtr& x = self.parents[0];
    if (!x->requires_grad) return;
    x->ensure_grad();
    for (std::size_t i = 0; i < lsm_copy.rows; ++i) {
      const double g = self.grad(i, 0);
      for (std::size_t j = 0; j < lsm_copy.cols; ++j) {
        x->grad(i, j) += g * (std::exp(lsm_copy(i, j)) - targets(i, j));
      }
    }
  });
}

NodePtr normal_forward_kl(const NodePtr& mean, const NodePtr& std,
                          const Matrix& target_mean, const Matrix& target_std) {
  require_same_shape(mean->value, target_mean, "normal_forward_kl(mean)");
  require_same_shape(std->value, target_std, "normal_forward_kl(std)");
  const Matrix& mm = mean->value;
  const Matrix& sm = std->value;
  Matrix out(mm.rows, 1);
  for (std::size_t i = 0; i < mm.rows; ++i) {
    double kl = 0.0;
    for (std::size_t k = 0; k < mm.cols; ++k) {
      const double st = target_std(i, k);
      const double dm = target_mean(i, k) - mm(i, k);
      const double s2 = sm(i, k) * sm(i, k);
      kl += std::log(sm(i, k) / st) + (st * st + dm * dm) / (2.0 * s2) - 0.5;
    }
    out(i, 0) = kl;
  }
  Matrix mt = target_mean;
  Matrix st = target_std;
  return make_node(std::move(out), {mean, std}, [mt, st](Node& self) {
    const NodePtr& mean = self.parents[0];
    const NodePtr& std = self.parents[1];
    for (std::size_t i = 0; i < mt.rows; ++i) {
      const double g = self.grad(i, 0);
      for (std::size_t k = 0; k < mt.cols; ++k) {
        const double sm = std->value(i, k);
        const double dm = mt(i, k) - mean->value(i, k);
        if (mean->requires_grad) {
          mean->ensure_grad();
          mean->grad(i, k) += g * (mean->value(i, k) - mt(i, k)) / (sm * sm);
        }
        if (std->requires_grad) {
          std->ensure_grad();
          std->grad(i, k) +=
              g * (sm * sm - st(i, k) * st(i, k) - dm * dm) / (sm * sm * sm);
        }
      }
    }
  });
}

NodePtr ppo_clip_surrogate(const NodePtr& new_log_probs,
                           const Matrix& old_log_probs, const Matrix& advantages,
                           double clip_epsilon) {
  const Matrix& nlp = new_log_probs->value;
  if (nlp.cols != 1) throw std::invalid_argument("ppo_clip_surrogate: expects Nx1 log-probs");
  require_same_shape(nlp, old_log_probs, "ppo_clip_surrogate(old_log_probs)");
  require_same_shape(nlp, advantages, "ppo_clip_surrogate(advantages)");
  if (!(clip_epsilon > 0.0 && clip_epsilon < 1.0)) {
    throw std::invalid_argument("ppo_clip_surrogate: clip epsilon must be in (0,1)");
  }

  const double lo = 1.0 - clip_epsilon;
  const double hi = 1.0 + clip_epsilon;
  Matrix out(nlp.rows, 1);
  for (std::size_t i = 0; i < nlp.rows; ++i) {
    double rho = std::exp(nlp(i, 0) - old_log_probs(i, 0));
    double a = advantages(i, 0);
    double unclipped = rho * a;
    double clipped = std::clamp(rho, lo, hi) * a;
    out(i, 0) = std::min(unclipped, clipped);
  }

  Matrix old_copy = old_log_probs;
  Matrix adv_copy = advantages;
  return make_node(std::move(out), {new_log_probs},
                   [old_copy, adv_copy, lo, hi](Node& self) {
                     const NodePtr& nlp = self.parents[0];
                     if (!nlp->requires_grad) return;
                     nlp->ensure_grad();
                     for (std::size_t i = 0; i < self.grad.rows; ++i) {
                       double rho = std::exp(nlp->value(i, 0) - old_copy(i, 0));
                       double a = adv_copy(i, 0);
                       bool clipped_out = (a > 0.0 && rho >= hi) || (a < 0.0 && rho <= lo);
                       if (!clipped_out) nlp->grad(i, 0) += self.grad(i, 0) * rho * a;
                     }
                   });
}

void backward(const NodePtr& loss) {
  if (!loss) throw std::invalid_argument("backward: null node");
  if (!loss->value.is_scalar()) {
    throw std::invalid_argument("backward: seed must be a 1x1 scalar node");
  }

  // Iterative post-order DFS for the topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  struct Frame {
    Node* node;
    std::size_t next_parent;
  };
  std::vector<Frame> stack;
  stack.push_back({loss.get(), 0});
  visited.insert(loss.get());
  while (!stack.empty()) {
    Frame& top = stack.back();
    if (top.next_parent < top.node->parents.size()) {
      Node* p = top.node->parents[top.next_parent++].get();
      if (visited.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(top.node);
      stack.pop_back();
    }
  }

  loss->ensure_grad();
  loss->grad.data[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && n->requires_grad) {
      n->ensure_grad();
      n->backward_fn(*n);
    }
  }
}

void ParameterSet::add(const std::string& name, NodePtr parameter) {
  if (!parameter) throw std::invalid_argument("ParameterSet::add: null node");
  if (!parameter->requires_grad) {
    throw std::invalid_argument("ParameterSet::add: '" + name +
                                "' is not a trainable leaf");
  }
  for (const auto& [existing, _] : items_) {
    if (existing == name) {
      throw std::invalid_argument("ParameterSet::add: duplicate name '" + name + "'");
    }
  }
  items_.emplace_back(name, std::move(parameter));
}

NodePtr ParameterSet::get(const std::string& name) const {
  for (const auto& [n, node] : items_) {
    if (n == name) return node;
  }
  throw std::out_of_range("ParameterSet::get: no parameter named '" + name + "'");
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [_, node] : items_) n += node->value.size();
  return n;
}

void ParameterSet::zero_gradients() {
  for (auto& [_, node] : items_) node->zero_grad();
}

std::vector<double> ParameterSet::flatten_values() const {
  std::vector<double> out;
  out.reserve(scalar_count());
  for (const auto& [_, node] : items_)
    out.insert(out.end(), node->value.data.begin(), node->value.data.end());
  return out;
}

std::vector<double> ParameterSet::flatten_gradients() {
  std::vector<double> out;
  out.reserve(scalar_count());
  for (auto& [_, node] : items_) {
    node->ensure_grad();
    out.insert(out.end(), node->grad.data.begin(), node->grad.data.end());
  }
  return out;
}

void ParameterSet::load_values(const std::vector<double>& flat) {
  if (flat.size() != scalar_count()) {
    throw std::invalid_argument("ParameterSet::load_values: size mismatch");
  }
  std::size_t off = 0;
  for (auto& [_, node] : items_) {
    std::copy(flat.begin() + off, flat.begin() + off + node->value.size(),
              node->value.data.begin());
    off += node->value.size();
  }
}

std::vector<double> finite_difference_gradient(
    const std::function<double(const ParameterSet&)>& f, ParameterSet& params,
    double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_difference_gradient: h must be > 0");
  std::vector<double> grad(params.scalar_count());
  std::size_t off = 0;
  for (auto& [_, node] : params.items()) {
    for (std::size_t i = 0; i < node->value.size(); ++i) {
      double saved = node->value.data[i];
      node->value.data[i] = saved + h;
      double fp = f(params);
      node->value.data[i] = saved - h;
      double fm = f(params);
      node->value.data[i] = saved;
      grad[off + i] = (fp - fm) / (2.0 * h);
    }
    off += node->value.size();
  }
  return grad;
}

}  // namespace rldyn::ad
