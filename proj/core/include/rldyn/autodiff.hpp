#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "rldyn/matrix.hpp"

namespace rldyn::ad {

using rldyn::Matrix;

struct Node;
using NodePtr = std::shared_ptr<Node>;

/// One node of the computation graph. The graph is a DAG built forward by
/// the op constructors below; each op installs an explicit backward rule
/// that reads this node's gradient and accumulates into its parents.
///
/// Gradients accumulate additively. Call ParameterSet::zero_gradients()
/// before each minibatch; a second backward() without a reset adds on top
/// of the previous gradients.
struct Node {
  Matrix value;
  Matrix grad;  // zero-initialized on demand, same shape as value
  bool requires_grad = false;
  std::vector<NodePtr> parents;
  std::function<void(Node&)> backward_fn;  // empty for leaves/constants

  void ensure_grad() {
    if (!grad.same_shape(value)) grad = Matrix(value.rows, value.cols);
  }
  void zero_grad() { grad = Matrix(value.rows, value.cols); }
};

/// Non-trainable graph input (observations, stored rollout quantities).
NodePtr constant(Matrix value);

/// Trainable leaf; receives a gradient after backward().
NodePtr leaf(Matrix value);

enum class Activation { relu, tanh, softplus };
enum class Reduce { sum, mean };

/// y = x W + b with b broadcast over rows. x: N x I, W: I x O, b: 1 x O.
NodePtr linear(const NodePtr& x, const NodePtr& W, const NodePtr& b);

NodePtr activation(const NodePtr& x, Activation kind);

/// Row-wise log-softmax with max subtraction; rows of exp(output) sum to 1.
NodePtr log_softmax(const NodePtr& logits);

/// Full reduction to a 1x1 scalar node.
NodePtr reduce(const NodePtr& x, Reduce op);

/// N x C -> N x 1 row sums.
NodePtr row_sum(const NodePtr& x);

/// y[i] = x[i, idx[i]]; N x C -> N x 1.
NodePtr gather_cols(const NodePtr& x, const std::vector<std::size_t>& idx);

NodePtr add(const NodePtr& a, const NodePtr& b);
NodePtr sub(const NodePtr& a, const NodePtr& b);
NodePtr mul(const NodePtr& a, const NodePtr& b);  // elementwise
NodePtr div(const NodePtr& a, const NodePtr& b);  // elementwise
NodePtr exp(const NodePtr& x);
NodePtr log(const NodePtr& x);
NodePtr neg(const NodePtr& x);
NodePtr scale(const NodePtr& x, double c);
NodePtr add_scalar(const NodePtr& x, double c);
NodePtr square(const NodePtr& x);

/// Per-sample cross-entropy -sum_j p_j log_softmax(logits)_j against fixed
/// target probabilities (N x A -> N x 1). The backward rule uses the
/// simplified form softmax(logits) - p, which vanishes bit-exactly when the
/// model equals the target.
NodePtr softmax_cross_entropy(const NodePtr& logits, const Matrix& target_probs);

/// Per-sample forward KL between diagonal normals, KL(target || model),
/// summed over dimensions (N x K heads -> N x 1):
///   log(sm/st) + (st^2 + (mt - mm)^2) / (2 sm^2) - 1/2.
/// Backward uses the simplified gradients ((mm - mt)/sm^2 and
/// (sm^2 - st^2 - (mt - mm)^2)/sm^3), which vanish bit-exactly at equality.
NodePtr normal_forward_kl(const NodePtr& mean, const NodePtr& std,
                          const Matrix& target_mean, const Matrix& target_std);

/// Per-sample PPO-Clip surrogate (to maximize):
///   rho_i  = exp(new_log_prob_i - old_log_prob_i)
///   out_i  = min(rho_i * adv_i, clamp(rho_i, 1-eps, 1+eps) * adv_i)
/// The backward rule encodes the one-sided clipping exactly: the gradient
/// w.r.t. new_log_prob_i is rho_i * adv_i unless (adv_i > 0 and
/// rho_i >= 1+eps) or (adv_i < 0 and rho_i <= 1-eps), in which case it is
/// exactly zero, boundaries included.
NodePtr ppo_clip_surrogate(const NodePtr& new_log_probs,
                           const Matrix& old_log_probs, const Matrix& advantages,
                           double clip_epsilon);

/// Reverse-mode sweep from a 1x1 loss node. Seeds the loss gradient with 1
/// and traverses the graph in reverse topological order. Gradients add into
/// whatever is already stored.
void backward(const NodePtr& loss);

/// Named trainable leaves of a model, in a fixed order. The order defines
/// the layout of the flattened vectors used by the optimizer, gradient
/// clipping, finite differences, and checkpoints.
class ParameterSet {
 public:
  void add(const std::string& name, NodePtr parameter);
  NodePtr get(const std::string& name) const;

  std::size_t count() const { return items_.size(); }
  const std::vector<std::pair<std::string, NodePtr>>& items() const { return items_; }

  /// Total number of scalar parameters.
  std::size_t scalar_count() const;

  void zero_gradients();

  std::vector<double> flatten_values() const;
  std::vector<double> flatten_gradients();
  void load_values(const std::vector<double>& flat);

 private:
  std::vector<std::pair<std::string, NodePtr>> items_;
};

/// Central finite differences (f(p+h) - f(p-h)) / 2h per coordinate; the
/// gradient oracle used by the test suites. Restores the parameters it
/// perturbs.
std::vector<double> finite_difference_gradient(
    const std::function<double(const ParameterSet&)>& f, ParameterSet& params,
    double h);

}  // namespace rldyn::ad
