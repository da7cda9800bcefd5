#include <span>

#include "physgen/darcy.hpp"
#include "physgen/error.hpp"
#include "physgen/io/problem.hpp"

namespace physgen::io {

sampling::Standardizer channel_standardizer(const std::vector<Channel>& channels) {
  Eigen::Index dim = 0;
  for (const Channel& ch : channels) dim += ch.size();
  sampling::Standardizer s{Eigen::VectorXd(dim), Eigen::VectorXd(dim)};
  Eigen::Index at = 0;
  for (const Channel& ch : channels) {
    require(ch.std > 0.0, "channel std must be positive");
    s.mean.segment(at, ch.size()).setConstant(ch.mean);
    s.scale.segment(at, ch.size()).setConstant(ch.std);
    at += ch.size();
  }
  return s;
}

Problem make_problem(const Dataset& ds) {
  Problem p;
  p.kind = ds.kind;
  p.stdz = channel_standardizer(ds.channels);
  if (ds.kind == PdeKind::darcy) {
    const kle::DarcyDatasetSpec spec = darcy_spec(ds);
    const GridSpec grid(spec.n);
    p.ctx = sampling::darcy_context(grid, darcy::source_function(grid, spec.source));
    p.primary_size = grid.size();
    p.finalize = [grid](Eigen::Ref<Eigen::VectorXd> x, int) {
      zero_mean_normalize(grid, std::span<double>(x.data(), static_cast<std::size_t>(grid.size())));
    };
  } else {
    const burgers::BurgersConfig cfg = burgers_config(ds);
    p.ctx = sampling::burgers_context(cfg);
    p.primary_size = cfg.nt * cfg.nx;
    p.finalize = [](Eigen::Ref<Eigen::VectorXd>, int) {};
  }
  require(p.stdz.mean.size() == ds.dim(), "problem: channel layout does not match the PDE state");
  return p;
}

}  // namespace physgen::io
