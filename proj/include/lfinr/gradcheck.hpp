#pragma once

#include <functional>

#include "lfinr/tensor.hpp"

namespace lfinr {

// Central-difference gradient check. `f` evaluates the scalar objective from
// a flat parameter vector (re-running its own forward pass); `analytic` is
// the gradient produced by backward(). Returns the maximum over coordinates
// of |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
//
// This path never calls backward itself, so it stays independent of the
// reverse-mode machinery it is used to verify.
template <typename S>
double finite_difference_check(const std::function<double(const Vec<S>&)>& f,
                               const Vec<S>& x, const Vec<S>& analytic, double eps) {
  if (analytic.size() != x.size())
    throw NumericError("finite_difference_check: gradient length mismatch");
  double worst = 0.0;
  Vec<S> probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const S x0 = x[i];
    probe[i] = static_cast<S>(static_cast<double>(x0) + eps);
    const double f_plus = f(probe);
    probe[i] = static_cast<S>(static_cast<double>(x0) - eps);
    const double f_minus = f(probe);
    probe[i] = x0;
    const double numeric = (f_plus - f_minus) / (2.0 * eps);
    const double a = static_cast<double>(analytic[i]);
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(a - numeric) / denom);
  }
  return worst;
}

}  // namespace lfinr
