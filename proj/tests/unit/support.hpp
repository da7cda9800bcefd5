#pragma once

#include <Eigen/Core>
#include <cmath>
#include <functional>

#include "physgen/rng.hpp"

namespace testing {

inline Eigen::VectorXd normals(physgen::Rng& rng, Eigen::Index n) {
  Eigen::VectorXd v(n);
  rng.fill_normal(v);
  return v;
}

/// Central differences of f around x, one entry at a time.
inline Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
                                   double h) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd y = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    y[i] = x[i] + h;
    const double up = f(y);
    y[i] = x[i] - h;
    const double down = f(y);
    y[i] = x[i];
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

/// Largest entrywise relative error, with `floor` guarding near-zero entries.
inline double max_rel_err(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double floor) {
  const double scale = std::max(b.cwiseAbs().maxCoeff(), floor);
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

/// |mean - expected| in units of the standard error.
inline double z_score(double sample_mean, double expected, double sample_var, double count) {
  return std::abs(sample_mean - expected) / std::sqrt(sample_var / count);
}

}  // namespace testing
