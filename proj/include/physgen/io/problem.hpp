#pragma once

#include <functional>

#include "physgen/io/dataset.hpp"
#include "physgen/sampler.hpp"

namespace physgen::io {

/// Everything the samplers need to know about a dataset's PDE.
struct Problem {
  PdeKind kind = PdeKind::darcy;
  sampling::ConsistencyContext ctx;
  sampling::Standardizer stdz;
  /// Darcy: shifts pressure to zero trapezoid mean. Burgers: no-op.
  std::function<void(Eigen::Ref<Eigen::VectorXd>, int)> finalize;
  int primary_size = 0;  // pressure (Darcy) or slab (Burgers) entries

  double residual_sq(const Eigen::VectorXd& x) const { return ctx.residual_sq(x); }
};

/// Standardizer with each channel's mean and std expanded over its nodes.
sampling::Standardizer channel_standardizer(const std::vector<Channel>& channels);

Problem make_problem(const Dataset& ds);

}  // namespace physgen::io
