#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "alacs/errors.hpp"

namespace alacs {

/// Polynomial in one variable stored in a conditioned basis: the argument is
/// mapped to t = (x - center) / half_range before Horner evaluation.
template <typename Scalar>
class Polynomial {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Polynomial() = default;
  Polynomial(Vector normalized, Scalar center, Scalar half_range)
      : normalized_(std::move(normalized)), center_(center), half_range_(half_range) {}

  Scalar operator()(Scalar x) const {
    const Scalar t = (x - center_) / half_range_;
    Scalar acc(0);
    for (Eigen::Index k = normalized_.size() - 1; k >= 0; --k) acc = acc * t + normalized_[k];
    return acc;
  }

  int order() const { return static_cast<int>(normalized_.size()) - 1; }
  Scalar center() const { return center_; }
  Scalar half_range() const { return half_range_; }
  const Vector& normalized_coefficients() const { return normalized_; }

  /// Coefficients c0..cn of sum(c_k * x^k) in the original variable.
  Vector coefficients() const {
    const Eigen::Index n = normalized_.size();
    Vector out = Vector::Zero(n);
    for (Eigen::Index k = 0; k < n; ++k) {
      const Scalar scale = normalized_[k] / std::pow(half_range_, Scalar(k));
      Scalar binom(1);
      for (Eigen::Index j = 0; j <= k; ++j) {
        // binom = C(k, j)
        out[j] += scale * binom * std::pow(-center_, Scalar(k - j));
        binom = binom * Scalar(k - j) / Scalar(j + 1);
      }
    }
    return out;
  }

 private:
  Vector normalized_ = Vector::Zero(1);
  Scalar center_ = Scalar(0);
  Scalar half_range_ = Scalar(1);
};

template <typename Scalar>
struct PolynomialFit {
  Polynomial<Scalar> poly;
  Scalar residual_rms = Scalar(0);
  int requested_order = 0;

  bool reduced() const { return poly.order() < requested_order; }
};

/// Uniformly weighted least-squares fit of y(x). The order is lowered to
/// (distinct x count - 1) when there are too few samples; fewer than two
/// distinct abscissae is a FitError.
template <typename Scalar, typename DerivedX, typename DerivedY>
PolynomialFit<Scalar> fit_polynomial(const Eigen::DenseBase<DerivedX>& x, const Eigen::DenseBase<DerivedY>& y,
                                     int order) {
  using Vector = typename Polynomial<Scalar>::Vector;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (order < 0) throw FitError("polynomial order must be non-negative");
  if (x.size() != y.size()) throw FitError("fit abscissa/ordinate length mismatch");

  const Vector xs = x.derived().template cast<Scalar>();
  const Vector ys = y.derived().template cast<Scalar>();
  std::vector<Scalar> distinct(xs.data(), xs.data() + xs.size());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 2) {
    throw FitError("need at least 2 distinct samples to fit, got " + std::to_string(distinct.size()));
  }

  const int used = std::min<int>(order, static_cast<int>(distinct.size()) - 1);
  const Scalar lo = distinct.front();
  const Scalar hi = distinct.back();
  const Scalar center = (lo + hi) / Scalar(2);
  const Scalar half = (hi - lo) / Scalar(2);

  const Vector t = (xs.array() - center) / half;
  Matrix vander(xs.size(), used + 1);
  vander.col(0).setOnes();
  for (int k = 1; k <= used; ++k) vander.col(k) = vander.col(k - 1).cwiseProduct(t);

  const Vector coeffs = vander.colPivHouseholderQr().solve(ys);
  const Vector residual = vander * coeffs - ys;

  PolynomialFit<Scalar> fit;
  fit.poly = Polynomial<Scalar>(coeffs, center, half);
  fit.residual_rms = std::sqrt(residual.squaredNorm() / Scalar(xs.size()));
  fit.requested_order = order;
  return fit;
}

}  // namespace alacs
