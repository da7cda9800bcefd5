#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

namespace physgen::burgers {

struct BurgersConfig {
  double nu = 0.01;
  int nx = 64;
  int nt = 64;
  double dt = 0.01;
  double length = 1.0;

  double dx() const noexcept { return length / nx; }
};

void validate(const BurgersConfig& cfg);

struct SinusoidMode {
  double amplitude = 1.0;
  int wavenumber = 1;
  double phase = 0.0;
};

/// u0(x) = sum A sin(2 pi n x / L + phi) on the periodic grid x_i = i L / nx.
Eigen::VectorXd initial_condition(const std::vector<SinusoidMode>& modes, int nx, double length);

/// nt x nx slab: row j is u(., j dt).
using SpaceTimeField = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Conservative finite-volume (local Lax-Friedrichs flux on u^2/2) plus central diffusion,
/// explicit substepping between stored rows.
SpaceTimeField solve(const Eigen::VectorXd& u0, const BurgersConfig& cfg);

/// Internal substep used to advance one stored step for the given velocity bound.
double stable_substep(const BurgersConfig& cfg, double max_speed);

SpaceTimeField residual(const SpaceTimeField& u, const BurgersConfig& cfg);
SpaceTimeField residual_gradient(const SpaceTimeField& u, const BurgersConfig& cfg);
double residual_sq_norm(const SpaceTimeField& u, const BurgersConfig& cfg);

struct BurgersDatasetSpec {
  int count = 256;
  BurgersConfig config;
  int modes = 2;
  int max_wavenumber = 8;
  std::uint64_t seed = 0;
};

struct BurgersSample {
  SpaceTimeField u;
  std::vector<SinusoidMode> modes;
};

std::vector<SinusoidMode> draw_modes(std::uint64_t seed, std::uint64_t index, int modes, int max_wavenumber);
std::vector<BurgersSample> generate_burgers_samples(const BurgersDatasetSpec& spec);

}  // namespace physgen::burgers
