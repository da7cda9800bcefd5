#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "physgen/error.hpp"
#include "physgen/io/metrics.hpp"

namespace physgen::io {

double mean_sq_norm(const Eigen::MatrixXd& fields) {
  require(fields.cols() >= 1, "mean_sq_norm: no samples");
  return fields.colwise().squaredNorm().mean();
}

double mean_residual(const Problem& problem, const Eigen::MatrixXd& samples) {
  require(samples.cols() >= 1, "mean_residual: no samples");
  require(samples.rows() == problem.stdz.mean.size(), "mean_residual: sample dimension mismatch");
  double sum = 0.0;
  for (Eigen::Index k = 0; k < samples.cols(); ++k) sum += problem.residual_sq(samples.col(k));
  return sum / static_cast<double>(samples.cols());
}

MetricsRow eval_metrics(const Problem& problem, const Dataset& samples, double baseline,
                        const Eigen::MatrixXd* targets, bool want_errors) {
  MetricsRow row;
  row.mean_residual = mean_residual(problem, samples.data);
  row.excess_residual = row.mean_residual - baseline;
  const nlohmann::json& run = samples.params.contains("run") ? samples.params.at("run") : nlohmann::json::object();
  row.equation = run.value("equation", std::string());
  row.tau = run.value("tau", 0);
  row.N = run.value("N", 0);
  row.M = run.value("M", 0);
  row.m = run.value("m", 0);
  row.r = run.value("r", 0);
  row.score_evals = run.value("score_evals", 0L);
  row.residual_evals = run.value("residual_evals", 0L);
  if (want_errors && !targets) fail(ErrorCode::invalid_argument, "error metrics requested without targets");
  if (targets) {
    require(targets->rows() == samples.dim(), "targets dimension mismatch");
    require(targets->cols() == samples.count(), "targets must have one column per sample");
    const Eigen::MatrixXd diff = samples.data - *targets;
    const Eigen::Index first = samples.channels.front().size();
    row.pressure_error = mean_sq_norm(diff.topRows(first));
    if (samples.channels.size() > 1) row.permeability_error = mean_sq_norm(diff.middleRows(first, samples.channels[1].size()));
    if (samples.kind == PdeKind::burgers) row.rmse = std::sqrt(diff.array().square().mean());
  }
  return row;
}

std::string csv_header() {
  return "run_id,equation,tau,N,M,m,r,mean_residual_sq_sum,excess_residual_sq_sum,pressure_sq_error,"
         "permeability_sq_error,rmse,score_evals,residual_evals,wall_time_s";
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

namespace {

std::string num(double v) {
  std::ostringstream ss;
  ss << std::setprecision(17) << v;
  return ss.str();
}

std::string opt(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

}  // namespace

std::string csv_row(const MetricsRow& r) {
  std::ostringstream ss;
  ss << csv_escape(r.run_id) << ',' << csv_escape(r.equation) << ',' << r.tau << ',' << r.N << ',' << r.M << ',' << r.m
     << ',' << r.r << ',' << num(r.mean_residual) << ',' << num(r.excess_residual) << ',' << opt(r.pressure_error) << ','
     << opt(r.permeability_error) << ',' << opt(r.rmse) << ',' << r.score_evals << ',' << r.residual_evals << ','
     << num(r.wall_time);
  return ss.str();
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows) {
  std::error_code ec;
  const bool fresh = !std::filesystem::exists(path, ec) || std::filesystem::file_size(path, ec) == 0;
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) fail(ErrorCode::io, "cannot write " + path.string());
  if (fresh) out << csv_header() << "\r\n";
  for (const MetricsRow& r : rows) out << csv_row(r) << "\r\n";
  if (!out) fail(ErrorCode::io, "write failed for " + path.string());
}

}  // namespace physgen::io
