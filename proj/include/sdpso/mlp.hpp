#pragma once

// Fully connected regressor D -> h1 -> h2 -> 1 with tanh hidden units and a
// linear output, plus the adaptive-moment optimizer used to fit it.

#include "sdpso/domain.hpp"

#include <cmath>

namespace sdpso {

template <typename Scalar>
struct MlpParameters {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using RowVec = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

  Matrix w1;  // h1 x D
  Vec b1;
  Matrix w2;  // h2 x h1
  Vec b2;
  RowVec w3;  // 1 x h2
  Scalar b3 = Scalar(0);

  static MlpParameters zeros(Eigen::Index inputs, Eigen::Index h1, Eigen::Index h2) {
    MlpParameters p;
    p.w1 = Matrix::Zero(h1, inputs);
    p.b1 = Vec::Zero(h1);
    p.w2 = Matrix::Zero(h2, h1);
    p.b2 = Vec::Zero(h2);
    p.w3 = RowVec::Zero(h2);
    p.b3 = Scalar(0);
    return p;
  }

  /// Glorot-uniform weights, zero biases.
  static MlpParameters glorot(Eigen::Index inputs, Eigen::Index h1, Eigen::Index h2, RandomStream& stream) {
    MlpParameters p = zeros(inputs, h1, h2);
    auto fill = [&stream](auto& m) {
      const double limit = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
      for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = static_cast<Scalar>(stream.uniform(-limit, limit));
    };
    fill(p.w1);
    fill(p.w2);
    fill(p.w3);
    return p;
  }

  Eigen::Index inputs() const { return w1.cols(); }
  Eigen::Index hidden1() const { return w1.rows(); }
  Eigen::Index hidden2() const { return w2.rows(); }
  Eigen::Index size() const { return w1.size() + b1.size() + w2.size() + b2.size() + w3.size() + 1; }

  bool same_shape(const MlpParameters& o) const {
    return inputs() == o.inputs() && hidden1() == o.hidden1() && hidden2() == o.hidden2();
  }

  /// Parameters packed as w1, b1, w2, b2, w3, b3 (column-major within each block).
  Vec flatten() const {
    Vec flat(size());
    Eigen::Index k = 0;
    auto put = [&](const auto& m) {
      flat.segment(k, m.size()) = Eigen::Map<const Vec>(m.data(), m.size());
      k += m.size();
    };
    put(w1);
    put(b1);
    put(w2);
    put(b2);
    put(w3);
    flat[k] = b3;
    return flat;
  }

  void assign(const Vec& flat) {
    eigen_assert(flat.size() == size());
    Eigen::Index k = 0;
    auto take = [&](auto& m) {
      Eigen::Map<Vec>(m.data(), m.size()) = flat.segment(k, m.size());
      k += m.size();
    };
    take(w1);
    take(b1);
    take(w2);
    take(b2);
    take(w3);
    b3 = flat[k];
  }
};

/// Network output for a single (already normalised) input.
template <typename Scalar, typename Derived>
Scalar mlp_forward(const MlpParameters<Scalar>& p, const Eigen::MatrixBase<Derived>& x) {
  if (x.size() != p.inputs()) throw ConfigError("mlp_forward: input dimension mismatch");
  const typename MlpParameters<Scalar>::Vec a1 = (p.w1 * x + p.b1).array().tanh();
  const typename MlpParameters<Scalar>::Vec a2 = (p.w2 * a1 + p.b2).array().tanh();
  return p.w3.dot(a2) + p.b3;
}

/// Outputs for a batch of inputs stored one per column.
template <typename Scalar, typename Derived>
typename MlpParameters<Scalar>::RowVec mlp_forward_batch(const MlpParameters<Scalar>& p,
                                                          const Eigen::MatrixBase<Derived>& xs) {
  if (xs.rows() != p.inputs()) throw ConfigError("mlp_forward_batch: input dimension mismatch");
  using Matrix = typename MlpParameters<Scalar>::Matrix;
  const Matrix a1 = ((p.w1 * xs).colwise() + p.b1).array().tanh();
  const Matrix a2 = ((p.w2 * a1).colwise() + p.b2).array().tanh();
  return (p.w3 * a2).array() + p.b3;
}

/// Mean squared error over the batch and its gradient with respect to every
/// parameter, by backpropagation.
template <typename Scalar, typename DerivedX, typename DerivedY>
Scalar mlp_mse_gradient(const MlpParameters<Scalar>& p, const Eigen::MatrixBase<DerivedX>& xs,
                        const Eigen::MatrixBase<DerivedY>& targets, MlpParameters<Scalar>& grad) {
  using Matrix = typename MlpParameters<Scalar>::Matrix;
  using RowVec = typename MlpParameters<Scalar>::RowVec;
  const Scalar n = static_cast<Scalar>(xs.cols());

  const Matrix a1 = ((p.w1 * xs).colwise() + p.b1).array().tanh();
  const Matrix a2 = ((p.w2 * a1).colwise() + p.b2).array().tanh();
  const RowVec residual = ((p.w3 * a2).array() + p.b3).matrix() - targets.derived().reshaped().transpose();

  const RowVec d_out = (Scalar(2) / n) * residual;
  grad.w3 = d_out * a2.transpose();
  grad.b3 = d_out.sum();
  const Matrix d_z2 = (p.w3.transpose() * d_out).array() * (Scalar(1) - a2.array().square());
  grad.w2 = d_z2 * a1.transpose();
  grad.b2 = d_z2.rowwise().sum();
  const Matrix d_z1 = (p.w2.transpose() * d_z2).array() * (Scalar(1) - a1.array().square());
  grad.w1 = d_z1 * xs.transpose();
  grad.b1 = d_z1.rowwise().sum();

  return residual.squaredNorm() / n;
}

/// Adaptive-moment gradient descent over a flat parameter vector.
template <typename Scalar>
class AdamOptimizer {
 public:
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  AdamOptimizer(Eigen::Index size, Scalar step, Scalar beta1 = Scalar(0.9), Scalar beta2 = Scalar(0.999),
                Scalar epsilon = Scalar(1e-8))
      : m_(Vec::Zero(size)), v_(Vec::Zero(size)), step_(step), beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {}

  void update(Vec& params, const Vec& grad) {
    ++t_;
    m_ = beta1_ * m_ + (Scalar(1) - beta1_) * grad;
    v_ = beta2_ * v_ + (Scalar(1) - beta2_) * grad.cwiseAbs2();
    const Scalar bc1 = Scalar(1) - std::pow(beta1_, static_cast<Scalar>(t_));
    const Scalar bc2 = Scalar(1) - std::pow(beta2_, static_cast<Scalar>(t_));
    params.array() -= step_ * (m_.array() / bc1) / ((v_.array() / bc2).sqrt() + epsilon_);
  }

  long steps() const { return t_; }

 private:
  Vec m_, v_;
  Scalar step_, beta1_, beta2_, epsilon_;
  long t_ = 0;
};

}  // namespace sdpso
