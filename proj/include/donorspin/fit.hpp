#pragma once

#include <Eigen/Core>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace donorspin {

enum class ModelKind { sinusoid, exp_decay, gaussian_decay, cubed_exp_decay, power_law, damped_sinusoid };

std::string_view to_string(ModelKind k);
// Accepts the enum names plus the short forms exp, gaussian, cubed_exp.
ModelKind parse_model_kind(std::string_view name);

struct FitParameter {
  std::string name;
  double initial = 0.0;
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
  bool fixed = false;
};

// Model functions (x is the abscissa):
//   sinusoid         offset + amplitude cos(frequency x + phase)
//   exp_decay        amplitude exp(-x / decay_time) + offset
//   gaussian_decay   amplitude exp(-(x / decay_time)^2) + offset
//   cubed_exp_decay  amplitude exp(-(x / decay_time)^3) + offset
//   power_law        amplitude x^exponent
//   damped_sinusoid  offset + amplitude exp(-x / decay_time) cos(frequency x + phase)
// Decay offsets start fixed at 0.
struct CurveModel {
  ModelKind kind = ModelKind::exp_decay;
  std::vector<FitParameter> parameters;

  static CurveModel make(ModelKind kind);
  // make() with initial values guessed from the data: decay times from the
  // 1/e crossing, sinusoid frequency from a periodogram (or the hint).
  static CurveModel guess(ModelKind kind, std::span<const double> x, std::span<const double> y,
                          std::optional<double> frequency_hint = {});

  FitParameter& parameter(std::string_view name);
  const FitParameter& parameter(std::string_view name) const;
  double evaluate(double x, std::span<const double> values) const;
  void validate() const;  // throws ValidationError
};

struct FitResult {
  std::string model;
  std::vector<std::string> names;
  Eigen::VectorXd values;
  Eigen::VectorXd uncertainties;  // 1 sigma, 0 for fixed parameters
  Eigen::MatrixXd covariance;     // over all parameters, zero rows for fixed ones
  double residual_norm = 0.0;     // sqrt of the weighted sum of squares
  double initial_residual_norm = 0.0;
  double reduced_chi_square = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string message;
  std::map<std::string, double> model_comparison;  // kind -> residual norm

  double value(std::string_view name) const;
  double uncertainty(std::string_view name) const;
  nlohmann::json to_json() const;
};

struct LmOptions {
  int max_iterations = 500;
  double parameter_tolerance = 1e-8;  // relative step
  double residual_tolerance = 1e-10;  // relative change of the sum of squares
  double initial_lambda = 1e-3;
};

// Weighted residual vector r(p) for the free parameters.
using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

// Levenberg-Marquardt with central-difference Jacobians, bounds by projection.
// Parameters are internally scaled by max(|p0|, tiny) so that quantities of
// very different magnitude (ns and s^-1) share one damping parameter.
// Never throws for a singular problem: reports converged = false instead.
FitResult levenberg_marquardt(const ResidualFn& residuals, const Eigen::VectorXd& initial,
                              const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                              const LmOptions& opt = {});

// sigma: optional per-point standard deviations (weights 1/sigma).
FitResult fit_curve(const CurveModel& model, std::span<const double> x, std::span<const double> y,
                    std::span<const double> sigma = {}, const LmOptions& opt = {});

// Fits each kind with guessed starts and attaches every residual norm to the
// returned best (smallest residual) fit.
FitResult compare_models(std::span<const ModelKind> kinds, std::span<const double> x,
                         std::span<const double> y, std::span<const double> sigma = {});

struct FringeFit {
  double amplitude = 0.0;  // V = (max - min) / 2 of the fitted sinusoid
  double amplitude_error = 0.0;
  double phase = 0.0;
  double offset = 0.0;
  double frequency = 0.0;  // rad/s
  double frequency_error = 0.0;
  bool fixed_frequency = true;
  double residual_norm = 0.0;
};

// Known frequency: linear least squares on cos/sin/offset. Otherwise a
// periodogram start refined by Levenberg-Marquardt; then the trace must span
// at least two periods of the fitted frequency and have >= 4 points per
// period, else ValidationError.
FringeFit fit_fringe(std::span<const double> x, std::span<const double> y,
                     std::optional<double> known_frequency = {},
                     std::optional<double> frequency_hint = {});

struct PowerLawFit {
  double exponent = 0.0;
  double exponent_error = 0.0;
  double amplitude = 0.0;  // y = amplitude x^exponent
  double log_amplitude_error = 0.0;
};

// Straight-line fit of log y against log x. Requires positive data.
PowerLawFit fit_power_law_loglog(std::span<const double> x, std::span<const double> y);

}  // namespace donorspin
