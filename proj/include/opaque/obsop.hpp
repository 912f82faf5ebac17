#pragma once

#include <vector>

#include "opaque/mdp.hpp"
#include "opaque/observation.hpp"
#include "opaque/types.hpp"

namespace opaque {

/// Observable operators A_o = T diag(E(o|.)) of the hidden Markov chain seen
/// by the observer, optionally with first and second derivatives of T with
/// respect to the softmax parameters.
///
/// Derivatives exploit that theta_{j,b} only touches column j of T. With
/// D = N * A parameters:
///   chain_jacobian (N x D):        column k = (j, b) holds dT(:, j) / dtheta_{j,b}
///   chain_hessian  (N x N*A*A):    column (j*A + b)*A + c holds d2T(:, j) / dtheta_{j,b} dtheta_{j,c}
template <typename Scalar>
class ObservableOperators {
 public:
  using Matrix = MatrixX<Scalar>;
  using Vector = VectorX<Scalar>;

  /// Order-0 operators from a column-stochastic chain.
  ObservableOperators(Matrix chain, Matrix emission)
      : chain_(std::move(chain)), emission_(std::move(emission)), num_actions_(0), order_(0) {
    if (chain_.rows() != chain_.cols() || emission_.rows() != chain_.rows()) {
      throw InputError("chain and emission dimensions disagree");
    }
  }

  /// Operators for the chain induced by `action_probabilities` (N x A) on
  /// `transition` (one column-stochastic N x N matrix per action).
  ObservableOperators(std::vector<Matrix> transition, Matrix action_probabilities, Matrix emission,
                      int order)
      : emission_(std::move(emission)),
        transition_(std::move(transition)),
        pi_(std::move(action_probabilities)),
        num_actions_(pi_.cols()),
        order_(order) {
    if (order < 0 || order > 2) throw InputError("derivative order must be 0, 1 or 2");
    const Index n = pi_.rows();
    if (static_cast<Index>(transition_.size()) != num_actions_ || emission_.rows() != n) {
      throw InputError("transition, policy and emission dimensions disagree");
    }
    chain_ = Matrix::Zero(n, n);
    for (Index a = 0; a < num_actions_; ++a) {
      if (transition_[a].rows() != n || transition_[a].cols() != n) {
        throw InputError("transition matrix has wrong shape");
      }
      chain_.noalias() += transition_[a] * pi_.col(a).asDiagonal();
    }
    if (order_ >= 1) build_jacobian();
    if (order_ >= 2) build_hessian();
  }

  Index num_states() const { return chain_.rows(); }
  Index num_observations() const { return emission_.cols(); }
  Index num_actions() const { return num_actions_; }
  Index num_parameters() const { return num_states() * num_actions_; }
  int order() const { return order_; }

  const Matrix& chain() const { return chain_; }
  const Matrix& emission() const { return emission_; }
  auto emission_column(Index o) const { return emission_.col(o); }
  const std::vector<Matrix>& transition() const { return transition_; }
  const Matrix& action_probabilities() const { return pi_; }
  const Matrix& chain_jacobian() const { return require(1), jacobian_; }
  const Matrix& chain_hessian() const { return require(2), hessian_; }

  /// A_o as a dense matrix.
  Matrix op(Index o) const { return chain_ * emission_.col(o).asDiagonal(); }

  /// dA_o / dtheta_k as a dense matrix (only column j(k) is nonzero).
  Matrix op_derivative(Index o, Index k) const {
    require(1);
    const Index j = k / num_actions_;
    Matrix d = Matrix::Zero(num_states(), num_states());
    d.col(j) = jacobian_.col(k) * emission_(j, o);
    return d;
  }

  /// d2A_o / dtheta_k dtheta_l as a dense matrix; zero unless k, l share a state.
  Matrix op_second_derivative(Index o, Index k, Index l) const {
    require(2);
    const Index j = k / num_actions_;
    Matrix d = Matrix::Zero(num_states(), num_states());
    if (l / num_actions_ != j) return d;
    const Index b = k % num_actions_;
    const Index c = l % num_actions_;
    d.col(j) = hessian_.col((j * num_actions_ + b) * num_actions_ + c) * emission_(j, o);
    return d;
  }

  void require(int order) const {
    if (order_ < order) throw InputError("operators were built without the requested derivatives");
  }

 private:
  void build_jacobian() {
    const Index n = num_states();
    const Index m = num_actions_;
    jacobian_.resize(n, n * m);
    for (Index j = 0; j < n; ++j) {
      for (Index b = 0; b < m; ++b) {
        jacobian_.col(j * m + b) = pi_(j, b) * (transition_[b].col(j) - chain_.col(j));
      }
    }
  }

  void build_hessian() {
    const Index n = num_states();
    const Index m = num_actions_;
    hessian_.resize(n, n * m * m);
    for (Index j = 0; j < n; ++j) {
      for (Index b = 0; b < m; ++b) {
        for (Index c = 0; c < m; ++c) {
          Vector col = -pi_(j, b) * pi_(j, c) *
                       (transition_[b].col(j) + transition_[c].col(j) - Scalar(2) * chain_.col(j));
          if (b == c) col += pi_(j, b) * (transition_[b].col(j) - chain_.col(j));
          hessian_.col((j * m + b) * m + c) = col;
        }
      }
    }
  }

  Matrix chain_;
  Matrix emission_;
  std::vector<Matrix> transition_;
  Matrix pi_;
  Index num_actions_;
  int order_;
  Matrix jacobian_;
  Matrix hessian_;
};

/// Operators for `policy` acting on `mdp`, observed through `obs`.
ObservableOperators<double> build_operators(const Mdp& mdp, const SoftmaxPolicy& policy,
                                            const ObservationModel& obs, int order);

/// Order-0 operators of an arbitrary chain.
ObservableOperators<double> build_operators(const Mat& chain, const ObservationModel& obs);

namespace detail {

template <typename Scalar>
void check_sequence(const ObservableOperators<Scalar>& ops, const ObservationSequence& y) {
  if (y.empty()) throw InputError("observation sequence is empty");
  for (Index o : y) {
    if (o < 0 || o >= ops.num_observations()) throw InputError("observation symbol out of range");
  }
}

}  // namespace detail

/// alpha_T = P(S_T = ., y) for initial distribution mu0, computed as
/// diag(e_T) T ... diag(e_1) T diag(e_0) mu0.
template <typename Scalar, typename Derived>
VectorX<Scalar> terminal_joint(const ObservableOperators<Scalar>& ops,
                               const Eigen::MatrixBase<Derived>& mu0, const ObservationSequence& y) {
  detail::check_sequence(ops, y);
  if (mu0.size() != ops.num_states()) throw InputError("initial distribution has wrong size");
  VectorX<Scalar> alpha = ops.emission_column(y[0]).cwiseProduct(mu0);
  for (std::size_t t = 1; t < y.size(); ++t) {
    alpha = ops.emission_column(y[t]).cwiseProduct(ops.chain() * alpha);
  }
  return alpha;
}

/// A_{o_T} ... A_{o_0} mu0 = P(S_{T+1} = ., y).
template <typename Scalar, typename Derived>
VectorX<Scalar> predictive_joint(const ObservableOperators<Scalar>& ops,
                                 const Eigen::MatrixBase<Derived>& mu0,
                                 const ObservationSequence& y) {
  return ops.chain() * terminal_joint(ops, mu0, y);
}

/// P(y) = 1^T A_{o_T} ... A_{o_0} mu0.
template <typename Scalar, typename Derived>
Scalar observation_probability(const ObservableOperators<Scalar>& ops,
                               const Eigen::MatrixBase<Derived>& mu0, const ObservationSequence& y) {
  return terminal_joint(ops, mu0, y).sum();
}

/// P(S_T = . | y). Throws UndefinedPosterior when P(y) is negligible.
template <typename Scalar, typename Derived>
VectorX<Scalar> terminal_posterior(const ObservableOperators<Scalar>& ops,
                                   const Eigen::MatrixBase<Derived>& mu0,
                                   const ObservationSequence& y) {
  VectorX<Scalar> joint = terminal_joint(ops, mu0, y);
  const Scalar p = joint.sum();
  if (!(p > Scalar(kNegligibleProbability))) {
    throw UndefinedPosterior("posterior undefined: the observation sequence has probability zero");
  }
  return joint / p;
}

/// The dense product A_{o_T} ... A_{o_0}.
template <typename Scalar>
MatrixX<Scalar> operator_product(const ObservableOperators<Scalar>& ops,
                                 const ObservationSequence& y) {
  detail::check_sequence(ops, y);
  MatrixX<Scalar> product = ops.op(y[0]);
  for (std::size_t t = 1; t < y.size(); ++t) product = ops.op(y[t]) * product;
  return product;
}

/// P(y | S_0 = s0) = 1^T A_{o_T} ... A_{o_0} 1_{s0}.
template <typename Scalar>
Scalar probability_given_initial(const ObservableOperators<Scalar>& ops,
                                 const ObservationSequence& y, Index s0) {
  if (s0 < 0 || s0 >= ops.num_states()) throw InputError("initial state out of range");
  return terminal_joint(ops, VectorX<Scalar>::Unit(ops.num_states(), s0), y).sum();
}

/// Forward and backward messages along one observation sequence, with
/// derivatives up to `order`.
///   alpha[t](j) = P(S_t = j, o_0..o_t)
///   beta[t](i)  = P(o_t..o_T | S_t = i)
/// so that sum_j alpha[T](j) = sum_i mu0(i) beta[0](i) = P(y). Gradients are
/// N x D (row = state); Hessians hold one D x D matrix per state.
template <typename Scalar>
struct MessageStack {
  using Matrix = MatrixX<Scalar>;
  using Vector = VectorX<Scalar>;

  int order = 0;
  std::vector<Vector> alpha;
  std::vector<Matrix> alpha_grad;
  std::vector<std::vector<Matrix>> alpha_hess;
  std::vector<Vector> beta;
  std::vector<Matrix> beta_grad;
  std::vector<std::vector<Matrix>> beta_hess;

  bool has_forward() const { return !alpha.empty(); }
  bool has_backward() const { return !beta.empty(); }

  Scalar probability() const { return alpha.back().sum(); }
  Vector gradient() const { return alpha_grad.back().colwise().sum().transpose(); }
  Matrix hessian() const {
    Matrix h = alpha_hess.back().front();
    for (std::size_t j = 1; j < alpha_hess.back().size(); ++j) h += alpha_hess.back()[j];
    return h;
  }

  Scalar probability_given_initial(Index s0) const { return beta.front()(s0); }
  Vector gradient_given_initial(Index s0) const { return beta_grad.front().row(s0).transpose(); }
  const Matrix& hessian_given_initial(Index s0) const { return beta_hess.front()[s0]; }
};

/// Forward messages from initial distribution mu0.
template <typename Scalar, typename Derived>
MessageStack<Scalar> forward_messages(const ObservableOperators<Scalar>& ops,
                                      const Eigen::MatrixBase<Derived>& mu0,
                                      const ObservationSequence& y, int order) {
  using Matrix = MatrixX<Scalar>;
  detail::check_sequence(ops, y);
  ops.require(order);
  if (mu0.size() != ops.num_states()) throw InputError("initial distribution has wrong size");
  const Index n = ops.num_states();
  const Index m = ops.num_actions();
  const Index d = ops.num_parameters();
  const std::size_t length = y.size();

  MessageStack<Scalar> msg;
  msg.order = order;
  msg.alpha.resize(length);
  msg.alpha[0] = ops.emission_column(y[0]).cwiseProduct(mu0);
  if (order >= 1) {
    msg.alpha_grad.resize(length);
    msg.alpha_grad[0] = Matrix::Zero(n, d);
  }
  if (order >= 2) {
    msg.alpha_hess.resize(length);
    msg.alpha_hess[0].assign(n, Matrix::Zero(d, d));
  }

  const Matrix& t_mat = ops.chain();
  for (std::size_t t = 1; t < length; ++t) {
    auto e = ops.emission_column(y[t]);
    const auto& prev = msg.alpha[t - 1];
    msg.alpha[t] = e.cwiseProduct(t_mat * prev);
    if (order < 1) continue;

    const Matrix& jac = ops.chain_jacobian();
    const Matrix& prev_grad = msg.alpha_grad[t - 1];
    // dT alpha_{t-1}: column k = (j, b) contributes J(:, k) alpha_{t-1}(j)
    Matrix g = t_mat * prev_grad;
    for (Index k = 0; k < d; ++k) g.col(k) += jac.col(k) * prev(k / m);
    msg.alpha_grad[t] = e.asDiagonal() * g;
    if (order < 2) continue;

    const Matrix& hc = ops.chain_hessian();
    const auto& prev_hess = msg.alpha_hess[t - 1];
    auto& hess = msg.alpha_hess[t];
    hess.assign(n, Matrix::Zero(d, d));
    for (Index i = 0; i < n; ++i) {
      if (e(i) == Scalar(0)) continue;
      Matrix h = Matrix::Zero(d, d);
      for (Index j = 0; j < n; ++j) {
        if (t_mat(i, j) != Scalar(0)) h += t_mat(i, j) * prev_hess[j];
      }
      // cross term sum_j dT_ij (x) dalpha_{t-1}(j), plus its transpose
      Matrix cross = Matrix::Zero(d, d);
      for (Index k = 0; k < d; ++k) cross.row(k) = jac(i, k) * prev_grad.row(k / m);
      h += cross + cross.transpose();
      for (Index j = 0; j < n; ++j) {
        for (Index b = 0; b < m; ++b) {
          for (Index c = 0; c < m; ++c) {
            h(j * m + b, j * m + c) += hc(i, (j * m + b) * m + c) * prev(j);
          }
        }
      }
      hess[i] = e(i) * h;
    }
  }
  return msg;
}

/// Backward messages with beta[T] = E(o_T | .).
template <typename Scalar>
MessageStack<Scalar> backward_messages(const ObservableOperators<Scalar>& ops,
                                       const ObservationSequence& y, int order) {
  using Matrix = MatrixX<Scalar>;
  using Vector = VectorX<Scalar>;
  detail::check_sequence(ops, y);
  ops.require(order);
  const Index n = ops.num_states();
  const Index m = ops.num_actions();
  const Index d = ops.num_parameters();
  const std::size_t length = y.size();
  const std::size_t last = length - 1;

  MessageStack<Scalar> msg;
  msg.order = order;
  msg.beta.resize(length);
  msg.beta[last] = ops.emission_column(y[last]);
  if (order >= 1) {
    msg.beta_grad.resize(length);
    msg.beta_grad[last] = Matrix::Zero(n, d);
  }
  if (order >= 2) {
    msg.beta_hess.resize(length);
    msg.beta_hess[last].assign(n, Matrix::Zero(d, d));
  }

  const Matrix& t_mat = ops.chain();
  for (std::size_t t = last; t-- > 0;) {
    auto e = ops.emission_column(y[t]);
    const Vector& next = msg.beta[t + 1];
    msg.beta[t] = e.cwiseProduct(t_mat.transpose() * next);
    if (order < 1) continue;

    const Matrix& jac = ops.chain_jacobian();
    const Matrix& next_grad = msg.beta_grad[t + 1];
    // theta_{i,b} enters beta_t(i) through column i of T
    const Vector jt_beta = jac.transpose() * next;
    Matrix g = t_mat.transpose() * next_grad;
    for (Index k = 0; k < d; ++k) g(k / m, k) += jt_beta(k);
    msg.beta_grad[t] = e.asDiagonal() * g;
    if (order < 2) continue;

    const Matrix& hc = ops.chain_hessian();
    const Matrix jt_grad = jac.transpose() * next_grad;  // D x D
    const auto& next_hess = msg.beta_hess[t + 1];
    auto& hess = msg.beta_hess[t];
    hess.assign(n, Matrix::Zero(d, d));
    for (Index i = 0; i < n; ++i) {
      if (e(i) == Scalar(0)) continue;
      Matrix h = Matrix::Zero(d, d);
      for (Index j = 0; j < n; ++j) {
        if (t_mat(j, i) != Scalar(0)) h += t_mat(j, i) * next_hess[j];
      }
      Matrix cross = Matrix::Zero(d, d);
      for (Index b = 0; b < m; ++b) cross.row(i * m + b) = jt_grad.row(i * m + b);
      h += cross + cross.transpose();
      for (Index b = 0; b < m; ++b) {
        for (Index c = 0; c < m; ++c) {
          h(i * m + b, i * m + c) += hc.col((i * m + b) * m + c).dot(next);
        }
      }
      hess[i] = e(i) * h;
    }
  }
  return msg;
}

/// Forward and backward messages together.
template <typename Scalar, typename Derived>
MessageStack<Scalar> differentiated_messages(const ObservableOperators<Scalar>& ops,
                                             const Eigen::MatrixBase<Derived>& mu0,
                                             const ObservationSequence& y, int order) {
  MessageStack<Scalar> msg = forward_messages(ops, mu0, y, order);
  MessageStack<Scalar> back = backward_messages(ops, y, order);
  msg.beta = std::move(back.beta);
  msg.beta_grad = std::move(back.beta_grad);
  msg.beta_hess = std::move(back.beta_hess);
  return msg;
}

/// grad P(y) as sum_t 1^T A_{o_T}..A_{o_{t+1}} (dA_{o_t}/dtheta_k) A_{o_{t-1}}..A_{o_0} mu0,
/// using dense operator derivatives. Slow; intended as an independent check.
template <typename Scalar, typename Derived>
VectorX<Scalar> gradient_by_operator_products(const ObservableOperators<Scalar>& ops,
                                              const Eigen::MatrixBase<Derived>& mu0,
                                              const ObservationSequence& y) {
  detail::check_sequence(ops, y);
  ops.require(1);
  const std::size_t length = y.size();
  const Index n = ops.num_states();
  std::vector<VectorX<Scalar>> right(length);  // A_{o_{t-1}} .. A_{o_0} mu0
  right[0] = mu0;
  for (std::size_t t = 1; t < length; ++t) right[t] = ops.op(y[t - 1]) * right[t - 1];
  std::vector<VectorX<Scalar>> left(length);  // (1^T A_{o_T} .. A_{o_{t+1}})^T
  left[length - 1] = VectorX<Scalar>::Ones(n);
  for (std::size_t t = length - 1; t-- > 0;) left[t] = ops.op(y[t + 1]).transpose() * left[t + 1];

  VectorX<Scalar> grad = VectorX<Scalar>::Zero(ops.num_parameters());
  for (std::size_t t = 0; t < length; ++t) {
    for (Index k = 0; k < ops.num_parameters(); ++k) {
      grad(k) += left[t].dot(ops.op_derivative(y[t], k) * right[t]);
    }
  }
  return grad;
}

/// Scratch space for bilinear_gradients, reusable across sequences.
template <typename Scalar>
struct BilinearWorkspace {
  std::vector<MatrixX<Scalar>> alpha;
  MatrixX<Scalar> adjoint;
  MatrixX<Scalar> weighted;
  MatrixX<Scalar> through_chain;
  MatrixX<Scalar> through_action;
};

/// For initial vectors V (N x P) and readout weights C (N x K) computes
///   values(p, k) = C(:, k)^T alpha_T(V(:, p))
/// where alpha_T(v) is the forward message started from v, together with
/// grad (D x P*K), column p*K + k holding d values(p, k) / dtheta. Reverse
/// mode: one forward sweep and one adjoint sweep per sequence.
template <typename Scalar>
void bilinear_gradients(const ObservableOperators<Scalar>& ops, const MatrixX<Scalar>& v,
                        const MatrixX<Scalar>& c, const ObservationSequence& y,
                        MatrixX<Scalar>& values, MatrixX<Scalar>& grad,
                        BilinearWorkspace<Scalar>& ws) {
  detail::check_sequence(ops, y);
  ops.require(1);
  const Index n = ops.num_states();
  const Index m = ops.num_actions();
  const Index p_count = v.cols();
  const Index k_count = c.cols();
  const std::size_t length = y.size();
  if (v.rows() != n || c.rows() != n) throw InputError("bilinear weights have wrong size");

  ws.alpha.resize(length);
  ws.alpha[0] = ops.emission_column(y[0]).asDiagonal() * v;
  for (std::size_t t = 1; t < length; ++t) {
    ws.alpha[t].noalias() = ops.chain() * ws.alpha[t - 1];
    ws.alpha[t] = ops.emission_column(y[t]).asDiagonal() * ws.alpha[t];
  }
  values.noalias() = ws.alpha[length - 1].transpose() * c;

  grad.setZero(ops.num_parameters(), p_count * k_count);
  const auto& pi = ops.action_probabilities();
  ws.adjoint = c;
  for (std::size_t t = length - 1; t >= 1; --t) {
    ws.weighted = ops.emission_column(y[t]).asDiagonal() * ws.adjoint;
    ws.through_chain.noalias() = ops.chain().transpose() * ws.weighted;
    const MatrixX<Scalar>& prev = ws.alpha[t - 1];
    for (Index b = 0; b < m; ++b) {
      ws.through_action.noalias() = ops.transition()[b].transpose() * ws.weighted;
      ws.through_action -= ws.through_chain;
      for (Index j = 0; j < n; ++j) {
        const Scalar w = pi(j, b);
        if (w == Scalar(0)) continue;
        auto row = grad.row(j * m + b);
        for (Index p = 0; p < p_count; ++p) {
          const Scalar a = w * prev(j, p);
          if (a == Scalar(0)) continue;
          row.segment(p * k_count, k_count) += a * ws.through_action.row(j);
        }
      }
    }
    ws.adjoint.swap(ws.through_chain);
  }
}

}  // namespace opaque
