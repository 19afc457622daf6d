#include "donorspin/simultaneous_fit.hpp"

#include <cmath>
#include <mutex>

#include "donorspin/errors.hpp"
#include "donorspin/parallel.hpp"

namespace donorspin {

namespace {

constexpr double kPenalty = 1e3;

void check_dataset(IssueCollector& issues, const std::string& key, std::span<const double> energy,
                   std::span<const double> value, std::span<const double> sigma) {
  if (energy.size() != value.size()) issues.add(key, "energy and value columns differ in length");
  if (!sigma.empty() && sigma.size() != value.size()) {
    issues.add(key + ".sigma", "must be empty or match the data length");
  }
  for (double e : energy) {
    if (!(e >= 0.0) || !std::isfinite(e)) {
      issues.add(key + ".energy", "energies must be finite and >= 0");
      break;
    }
  }
  for (double v : value) {
    if (!std::isfinite(v)) {
      issues.add(key, "non-finite value");
      break;
    }
  }
  for (double s : sigma) {
    if (!(s > 0.0) || !std::isfinite(s)) {
      issues.add(key + ".sigma", "sigma must be finite and > 0");
      break;
    }
  }
}

ExperimentSetup with_parameters(const ExperimentSetup& base, double k, double beta1, double beta2) {
  ExperimentSetup s = base;
  s.calibration_k = k;
  s.dissipators.beta1 = beta1;
  s.dissipators.beta2 = beta2;
  return s;
}

}  // namespace

void SimultaneousFitSpec::validate(const RabiData& rabi, const FringeAmplitudeData& fringe) const {
  IssueCollector issues;
  check_dataset(issues, "rabi", rabi.energy, rabi.p_up, rabi.sigma);
  check_dataset(issues, "fringe", fringe.energy, fringe.amplitude, fringe.sigma);
  if (rabi.energy.size() + fringe.energy.size() < 4) {
    issues.add("data", "need at least 4 points over both datasets for 3 parameters");
  }
  if (!(fringe_weight > 0.0)) issues.add("fit.fringe_weight", "must be > 0");
  if (fringe_points < 4) issues.add("fit.fringe_points", "must be >= 4");
  if (!(fringe_delay >= 0.0)) issues.add("fit.fringe_delay_s", "must be >= 0");
  if (!(beta1_initial >= 0.0) || !(beta2_initial >= 0.0)) {
    issues.add("fit.beta_initial", "initial betas must be >= 0");
  }
  if (gamma_curve_points < 2) issues.add("fit.gamma_curve_points", "must be >= 2");
  issues.throw_if_any();
}

ForwardValues simultaneous_forward(const SimultaneousFitSpec& spec, double k, double beta1,
                                   double beta2, std::span<const double> rabi_energy,
                                   std::span<const double> fringe_energy) {
  ExperimentSetup s = with_parameters(spec.setup, k, beta1, beta2);
  ForwardValues out;
  if (!rabi_energy.empty()) out.rabi = run_rabi_sweep(s, rabi_energy).p_up;
  out.fringe.resize(fringe_energy.size());
  const DelayScan scan{{spec.fringe_delay}, 2.0 * M_PI / s.omega_e() / 8.0, spec.fringe_points};
  const int jobs = s.jobs;
  s.jobs = 1;
  parallel_for(static_cast<long>(fringe_energy.size()), jobs, [&](long i) {
    const std::size_t j = static_cast<std::size_t>(i);
    out.fringe[j] = run_ramsey(s, scan, fringe_energy[j]).windows.at(0).amplitude;
  });
  return out;
}

SimultaneousFitResult simultaneous_fit_rabi_fringe(const RabiData& rabi,
                                                   const FringeAmplitudeData& fringe,
                                                   const SimultaneousFitSpec& spec) {
  spec.validate(rabi, fringe);
  spec.setup.validate();
  const double k0 = spec.k_initial > 0.0 ? spec.k_initial : spec.setup.calibration_k;
  if (!(k0 > 0.0)) throw ValidationError("fit.k_initial", "need a positive starting k");

  const std::size_t nr = rabi.energy.size(), nf = fringe.energy.size();
  const double wf = std::sqrt(spec.fringe_weight);
  std::vector<std::string> rejected;
  std::mutex rejected_mutex;

  auto residuals = [&](const Eigen::VectorXd& p) -> Eigen::VectorXd {
    Eigen::VectorXd r(static_cast<long>(nr + nf));
    try {
      const ForwardValues f = simultaneous_forward(spec, p(0), p(1), p(2), rabi.energy, fringe.energy);
      for (std::size_t i = 0; i < nr; ++i) {
        const double s = rabi.sigma.empty() ? 1.0 : rabi.sigma[i];
        r(static_cast<long>(i)) = (f.rabi[i] - rabi.p_up[i]) / s;
      }
      for (std::size_t i = 0; i < nf; ++i) {
        const double s = fringe.sigma.empty() ? 1.0 : fringe.sigma[i];
        r(static_cast<long>(nr + i)) = wf * (f.fringe[i] - fringe.amplitude[i]) / s;
      }
    } catch (const NumericalError& e) {
      std::lock_guard lock(rejected_mutex);
      rejected.push_back("k=" + std::to_string(p(0)) + " beta1=" + std::to_string(p(1)) +
                         " beta2=" + std::to_string(p(2)) + ": " + e.what());
      r.setConstant(kPenalty);
    }
    return r;
  };

  const Eigen::Vector3d initial(k0, spec.beta1_initial, spec.beta2_initial);
  const Eigen::Vector3d lower(1e-6 * k0, 0.0, 0.0);
  const Eigen::Vector3d upper = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());

  SimultaneousFitResult out;
  out.fit = levenberg_marquardt(residuals, initial, lower, upper, spec.lm);
  out.fit.model = "rabi_fringe_4level";
  out.fit.names = {"calibration_k", "beta1", "beta2"};
  out.rejected_trials = std::move(rejected);

  const Eigen::VectorXd& p = out.fit.values;
  const ForwardValues best = simultaneous_forward(spec, p(0), p(1), p(2), rabi.energy, fringe.energy);
  out.rabi_model = best.rabi;
  out.fringe_model = best.fringe;

  double max_energy = 0.0;
  for (double e : rabi.energy) max_energy = std::max(max_energy, e);
  for (double e : fringe.energy) max_energy = std::max(max_energy, e);
  const ExperimentSetup s = with_parameters(spec.setup, p(0), p(1), p(2));
  const double peak = envelope_value(s.pulse(max_energy, 0.0), p(0), 0.0);
  const Eigen::Matrix2d cov = out.fit.covariance.block<2, 2>(1, 1);
  for (int i = 0; i < spec.gamma_curve_points; ++i) {
    const double w = peak * i / (spec.gamma_curve_points - 1);
    const Eigen::Vector2d grad(w, w * w);
    out.rabi_frequency.push_back(w);
    out.gamma.push_back(p(1) * w + p(2) * w * w);
    out.gamma_error.push_back(std::sqrt(std::max(0.0, grad.dot(cov * grad))));
  }
  return out;
}

nlohmann::json SimultaneousFitResult::to_json() const {
  nlohmann::json j = fit.to_json();
  j["gamma_curve"] = {{"rabi_frequency_rad_per_s", rabi_frequency},
                      {"gamma_rad_per_s", gamma},
                      {"gamma_error_rad_per_s", gamma_error}};
  j["rabi_model"] = rabi_model;
  j["fringe_model"] = fringe_model;
  j["rejected_trials"] = rejected_trials;
  return j;
}

}  // namespace donorspin
