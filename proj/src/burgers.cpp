#include "physgen/burgers.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "physgen/error.hpp"
#include "physgen/parallel.hpp"
#include "physgen/rng.hpp"

namespace physgen::burgers {

void validate(const BurgersConfig& cfg) {
  require(cfg.nu > 0.0 && std::isfinite(cfg.nu), "burgers: viscosity must be positive");
  require(cfg.nx >= 2 && cfg.nt >= 2, "burgers: nx and nt must be at least 2");
  require(cfg.dt > 0.0 && std::isfinite(cfg.dt), "burgers: dt must be positive");
  require(cfg.length > 0.0 && std::isfinite(cfg.length), "burgers: domain length must be positive");
}

Eigen::VectorXd initial_condition(const std::vector<SinusoidMode>& modes, int nx, double length) {
  require(nx >= 2 && length > 0.0, "burgers: invalid grid for initial condition");
  Eigen::VectorXd u = Eigen::VectorXd::Zero(nx);
  for (const auto& m : modes) {
    const double k = 2.0 * std::numbers::pi * m.wavenumber / length;
    for (int i = 0; i < nx; ++i) u[i] += m.amplitude * std::sin(k * (i * length / nx) + m.phase);
  }
  return u;
}

double stable_substep(const BurgersConfig& cfg, double max_speed) {
  const double dx = cfg.dx();
  double dt = 0.4 * dx * dx / cfg.nu;
  if (max_speed > 0.0) {
    dt = std::min(dt, 0.4 * dx / max_speed);
  }
  // keep the combined explicit update a convex combination of neighbours
  dt = std::min(dt, 0.9 / (max_speed / dx + 2.0 * cfg.nu / (dx * dx)));
  return dt;
}

namespace {

void advance(Eigen::VectorXd& u, double dt, const BurgersConfig& cfg, Eigen::VectorXd& flux) {
  const int nx = cfg.nx;
  const double dx = cfg.dx();
  for (int i = 0; i < nx; ++i) {
    const double ul = u[i], ur = u[(i + 1) % nx];
    const double a = std::max(std::abs(ul), std::abs(ur));
    // interface i + 1/2: local Lax-Friedrichs on u^2/2 minus the diffusive flux
    flux[i] = 0.25 * (ul * ul + ur * ur) - 0.5 * a * (ur - ul) - cfg.nu * (ur - ul) / dx;
  }
  for (int i = 0; i < nx; ++i) u[i] -= dt / dx * (flux[i] - flux[(i + nx - 1) % nx]);
}

}  // namespace

SpaceTimeField solve(const Eigen::VectorXd& u0, const BurgersConfig& cfg) {
  validate(cfg);
  require(u0.size() == cfg.nx, "burgers: initial condition length must equal nx");
  require(u0.allFinite(), "burgers: non-finite initial condition");

  SpaceTimeField out(cfg.nt, cfg.nx);
  Eigen::VectorXd u = u0, flux(cfg.nx);
  out.row(0) = u.transpose();
  for (int j = 1; j < cfg.nt; ++j) {
    const double speed = u.cwiseAbs().maxCoeff();
    const int substeps = static_cast<int>(std::ceil(cfg.dt / stable_substep(cfg, speed)));
    const double h = cfg.dt / substeps;
    for (int s = 0; s < substeps; ++s) advance(u, h, cfg, flux);
    if (!u.allFinite() || u.cwiseAbs().maxCoeff() > 1e3) {
      std::ostringstream msg;
      msg << "burgers: solution blew up at stored step " << j;
      fail(ErrorCode::diverged, msg.str());
    }
    out.row(j) = u.transpose();
  }
  return out;
}

namespace {

struct Operators {
  SpaceTimeField dt, dx, dxx;

  explicit Operators(const BurgersConfig& cfg) {
    const int nt = cfg.nt, nx = cfg.nx;
    require(nt >= 3 && nx >= 3, "burgers residual needs nt, nx >= 3");
    const double ct = 1.0 / (2.0 * cfg.dt);
    dt = SpaceTimeField::Zero(nt, nt);
    dt(0, 0) = -3.0 * ct, dt(0, 1) = 4.0 * ct, dt(0, 2) = -ct;
    for (int j = 1; j < nt - 1; ++j) dt(j, j - 1) = -ct, dt(j, j + 1) = ct;
    dt(nt - 1, nt - 1) = 3.0 * ct, dt(nt - 1, nt - 2) = -4.0 * ct, dt(nt - 1, nt - 3) = ct;

    const double h = cfg.dx();
    dx = SpaceTimeField::Zero(nx, nx);
    dxx = SpaceTimeField::Zero(nx, nx);
    for (int i = 0; i < nx; ++i) {
      const int l = (i + nx - 1) % nx, r = (i + 1) % nx;
      dx(i, r) += 1.0 / (2.0 * h);
      dx(i, l) -= 1.0 / (2.0 * h);
      dxx(i, l) += 1.0 / (h * h);
      dxx(i, r) += 1.0 / (h * h);
      dxx(i, i) -= 2.0 / (h * h);
    }
  }
};

}  // namespace

SpaceTimeField residual(const SpaceTimeField& u, const BurgersConfig& cfg) {
  validate(cfg);
  require(u.rows() == cfg.nt && u.cols() == cfg.nx, "burgers residual: slab shape mismatch");
  const Operators op(cfg);
  const SpaceTimeField ux = u * op.dx.transpose();
  return op.dt * u + (u.array() * ux.array()).matrix() - cfg.nu * (u * op.dxx.transpose());
}

SpaceTimeField residual_gradient(const SpaceTimeField& u, const BurgersConfig& cfg) {
  const SpaceTimeField r = residual(u, cfg);
  const Operators op(cfg);
  const SpaceTimeField ux = u * op.dx.transpose();
  const SpaceTimeField ur = u.array() * r.array();
  return 2.0 * (op.dt.transpose() * r + (r.array() * ux.array()).matrix() + ur * op.dx - cfg.nu * (r * op.dxx));
}

double residual_sq_norm(const SpaceTimeField& u, const BurgersConfig& cfg) { return residual(u, cfg).squaredNorm(); }

std::vector<SinusoidMode> draw_modes(std::uint64_t seed, std::uint64_t index, int modes, int max_wavenumber) {
  require(modes >= 1 && max_wavenumber >= 1, "burgers: invalid mode sampling parameters");
  Rng rng(stream_seed(seed, index));
  std::vector<SinusoidMode> out(modes);
  for (auto& m : out) {
    m.amplitude = rng.uniform();
    m.wavenumber = rng.uniform_int(1, max_wavenumber);
    m.phase = 2.0 * std::numbers::pi * rng.uniform();
  }
  return out;
}

std::vector<BurgersSample> generate_burgers_samples(const BurgersDatasetSpec& spec) {
  validate(spec.config);
  require(spec.count >= 1, "dataset count must be positive");
  std::vector<BurgersSample> out(spec.count);
  parallel_for(static_cast<std::size_t>(spec.count), [&](std::size_t k) {
    out[k].modes = draw_modes(spec.seed, k, spec.modes, spec.max_wavenumber);
    try {
      out[k].u = solve(initial_condition(out[k].modes, spec.config.nx, spec.config.length), spec.config);
    } catch (const Error& e) {
      fail(e.code(), "sample " + std::to_string(k) + ": " + e.what());
    }
  });
  return out;
}

}  // namespace physgen::burgers
