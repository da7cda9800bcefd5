#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "physgen/io/problem.hpp"

namespace physgen::io {

/// Squared norms are sums of squares over a sample's entries, averaged over samples.
struct MetricsRow {
  std::string run_id;
  std::string equation;
  int tau = 0;
  int N = 0;
  int M = 0;
  int m = 0;
  int r = 0;
  double mean_residual = 0.0;
  double excess_residual = 0.0;
  std::optional<double> pressure_error;      // first channel
  std::optional<double> permeability_error;  // second channel (Darcy)
  std::optional<double> rmse;                // Burgers slabs
  long score_evals = 0;
  long residual_evals = 0;
  double wall_time = 0.0;
};

/// Mean over columns of the per-column sum of squares.
double mean_sq_norm(const Eigen::MatrixXd& fields);

/// Mean of ||r||^2 over the columns of `samples`.
double mean_residual(const Problem& problem, const Eigen::MatrixXd& samples);

/// Residual columns plus squared errors against `targets` when given. Requesting
/// errors without targets is an error.
MetricsRow eval_metrics(const Problem& problem, const Dataset& samples, double baseline,
                        const Eigen::MatrixXd* targets, bool want_errors);

std::string csv_header();
std::string csv_row(const MetricsRow& row);
std::string csv_escape(const std::string& field);
/// Appends rows to `path`, writing the header first if the file is new or empty.
void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows);

}  // namespace physgen::io
