#include "donorspin/fit.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>

#include "donorspin/errors.hpp"

namespace donorspin {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPi = std::numbers::pi;

struct KindInfo {
  ModelKind kind;
  std::string_view name;
};

constexpr KindInfo kKinds[] = {
    {ModelKind::sinusoid, "sinusoid"},
    {ModelKind::exp_decay, "exp_decay"},
    {ModelKind::gaussian_decay, "gaussian_decay"},
    {ModelKind::cubed_exp_decay, "cubed_exp_decay"},
    {ModelKind::power_law, "power_law"},
    {ModelKind::damped_sinusoid, "damped_sinusoid"},
};

void check_data(std::span<const double> x, std::span<const double> y,
                std::span<const double> sigma, std::size_t min_points) {
  IssueCollector issues;
  if (x.size() != y.size()) issues.add("data", "x and y lengths differ");
  if (!sigma.empty() && sigma.size() != y.size()) issues.add("data", "sigma length differs");
  if (x.size() < min_points) {
    issues.add("data", "need at least " + std::to_string(min_points) + " points");
  }
  for (std::size_t i = 0; i < x.size() && i < y.size(); ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) {
      issues.add("data", "non-finite value at point " + std::to_string(i));
      break;
    }
  }
  for (double s : sigma) {
    if (!(s > 0.0) || !std::isfinite(s)) {
      issues.add("data", "sigma must be finite and > 0");
      break;
    }
  }
  issues.throw_if_any();
}

}  // namespace

std::string_view to_string(ModelKind k) {
  for (const auto& info : kKinds) {
    if (info.kind == k) return info.name;
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
  for (const auto& info : kKinds) {
    if (info.name == name) return info.kind;
  }
  if (name == "exp") return ModelKind::exp_decay;
  if (name == "gaussian") return ModelKind::gaussian_decay;
  if (name == "cubed_exp") return ModelKind::cubed_exp_decay;
  std::string valid;
  for (const auto& info : kKinds) valid += std::string(valid.empty() ? "" : ", ") + std::string(info.name);
  throw ValidationError("model", "unknown model '" + std::string(name) + "'; valid: " + valid +
                                     ", exp, gaussian, cubed_exp");
}

CurveModel CurveModel::make(ModelKind kind) {
  CurveModel m;
  m.kind = kind;
  auto p = [](std::string name, double init, double lo = -kInf, double hi = kInf) {
    return FitParameter{std::move(name), init, lo, hi, false};
  };
  switch (kind) {
    case ModelKind::sinusoid:
      m.parameters = {p("amplitude", 1.0), p("frequency", 1.0, 0.0), p("phase", 0.0),
                      p("offset", 0.0)};
      break;
    case ModelKind::exp_decay:
    case ModelKind::gaussian_decay:
    case ModelKind::cubed_exp_decay:
      m.parameters = {p("amplitude", 1.0), p("decay_time", 1.0, 0.0), p("offset", 0.0)};
      m.parameters[2].fixed = true;
      break;
    case ModelKind::power_law:
      m.parameters = {p("amplitude", 1.0), p("exponent", 1.0)};
      break;
    case ModelKind::damped_sinusoid:
      m.parameters = {p("amplitude", 1.0), p("frequency", 1.0, 0.0), p("phase", 0.0),
                      p("decay_time", 1.0, 0.0), p("offset", 0.0)};
      break;
  }
  return m;
}

FitParameter& CurveModel::parameter(std::string_view name) {
  for (auto& p : parameters) {
    if (p.name == name) return p;
  }
  throw ValidationError("model.parameters", "no parameter named '" + std::string(name) + "'");
}

const FitParameter& CurveModel::parameter(std::string_view name) const {
  return const_cast<CurveModel*>(this)->parameter(name);
}

double CurveModel::evaluate(double x, std::span<const double> v) const {
  switch (kind) {
    case ModelKind::sinusoid:
      return v[3] + v[0] * std::cos(v[1] * x + v[2]);
    case ModelKind::exp_decay:
      return v[0] * std::exp(-x / v[1]) + v[2];
    case ModelKind::gaussian_decay: {
      const double u = x / v[1];
      return v[0] * std::exp(-u * u) + v[2];
    }
    case ModelKind::cubed_exp_decay: {
      const double u = x / v[1];
      return v[0] * std::exp(-u * u * u) + v[2];
    }
    case ModelKind::power_law:
      return v[0] * std::pow(x, v[1]);
    case ModelKind::damped_sinusoid:
      return v[4] + v[0] * std::exp(-x / v[3]) * std::cos(v[1] * x + v[2]);
  }
  return 0.0;
}

void CurveModel::validate() const {
  IssueCollector issues;
  const std::size_t expected = make(kind).parameters.size();
  if (parameters.size() != expected) {
    issues.add("model.parameters", "model " + std::string(to_string(kind)) + " takes " +
                                       std::to_string(expected) + " parameters");
  }
  for (const auto& p : parameters) {
    if (!(p.lower <= p.initial && p.initial <= p.upper)) {
      issues.add("model.parameters." + p.name, "initial value outside its bounds");
    }
  }
  issues.throw_if_any();
}

namespace {

std::vector<std::size_t> order_by_x(std::span<const double> x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return x[a] < x[b]; });
  return idx;
}

// First abscissa where (y - offset) drops to 1/e of its initial value.
double one_over_e_crossing(std::span<const double> x, std::span<const double> y, double offset) {
  const auto idx = order_by_x(x);
  const double y0 = y[idx.front()] - offset;
  const double span = x[idx.back()] - x[idx.front()];
  if (y0 == 0.0) return span > 0.0 ? span : 1.0;
  const double target = y0 * std::exp(-1.0);
  for (std::size_t k = 1; k < idx.size(); ++k) {
    const double a = y[idx[k - 1]] - offset;
    const double b = y[idx[k]] - offset;
    if ((y0 > 0.0 && b <= target) || (y0 < 0.0 && b >= target)) {
      const double xa = x[idx[k - 1]];
      const double xb = x[idx[k]];
      const double frac = a == b ? 0.0 : (a - target) / (a - b);
      const double t = xa + frac * (xb - xa);
      return t > 0.0 ? t : std::max(xb, span / idx.size());
    }
  }
  return span > 0.0 ? 2.0 * x[idx.back()] : 1.0;
}

struct LinearSinusoid {
  double a = 0.0, b = 0.0, offset = 0.0;
  Eigen::Matrix3d covariance = Eigen::Matrix3d::Zero();
  double rss = 0.0;
};

LinearSinusoid linear_sinusoid(std::span<const double> x, std::span<const double> y, double w) {
  const long m = static_cast<long>(x.size());
  Eigen::MatrixXd design(m, 3);
  Eigen::VectorXd rhs(m);
  for (long i = 0; i < m; ++i) {
    design(i, 0) = std::cos(w * x[i]);
    design(i, 1) = std::sin(w * x[i]);
    design(i, 2) = 1.0;
    rhs(i) = y[i];
  }
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  const Eigen::Vector3d c = qr.solve(rhs);
  LinearSinusoid out;
  out.a = c(0);
  out.b = c(1);
  out.offset = c(2);
  out.rss = (design * c - rhs).squaredNorm();
  if (qr.rank() == 3 && m > 3) {
    const double s2 = out.rss / static_cast<double>(m - 3);
    out.covariance = s2 * (design.transpose() * design).inverse();
  }
  return out;
}

// Frequency of the strongest periodogram peak in [lo, hi].
double periodogram_peak(std::span<const double> x, std::span<const double> y, double lo,
                        double hi, double step) {
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  double best_w = lo, best_p = -1.0;
  for (double w = lo; w <= hi; w += step) {
    std::complex<double> acc(0.0, 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
      acc += (y[i] - mean) * std::exp(std::complex<double>(0.0, -w * x[i]));
    }
    const double p = std::norm(acc);
    if (p > best_p) {
      best_p = p;
      best_w = w;
    }
  }
  return best_w;
}

double guess_frequency(std::span<const double> x, std::span<const double> y,
                       std::optional<double> hint) {
  const auto idx = order_by_x(x);
  const double span = x[idx.back()] - x[idx.front()];
  double min_dx = kInf;
  for (std::size_t k = 1; k < idx.size(); ++k) {
    const double d = x[idx[k]] - x[idx[k - 1]];
    if (d > 0.0) min_dx = std::min(min_dx, d);
  }
  if (!(span > 0.0) || !std::isfinite(min_dx)) {
    throw ValidationError("data", "abscissa must span a nonzero range");
  }
  const double coarse = 2.0 * kPi / (8.0 * span);
  double w;
  if (hint) {
    w = periodogram_peak(x, y, 0.75 * *hint, 1.25 * *hint, coarse);
  } else {
    w = periodogram_peak(x, y, coarse, kPi / min_dx, coarse);
  }
  // refine around the coarse peak
  return periodogram_peak(x, y, std::max(w - coarse, 0.0), w + coarse, coarse / 50.0);
}

}  // namespace

CurveModel CurveModel::guess(ModelKind kind, std::span<const double> x, std::span<const double> y,
                             std::optional<double> frequency_hint) {
  check_data(x, y, {}, 2);
  CurveModel m = make(kind);
  const auto idx = order_by_x(x);
  switch (kind) {
    case ModelKind::exp_decay:
    case ModelKind::gaussian_decay:
    case ModelKind::cubed_exp_decay:
      m.parameters[0].initial = y[idx.front()];
      m.parameters[1].initial = one_over_e_crossing(x, y, 0.0);
      break;
    case ModelKind::power_law: {
      std::vector<double> lx, ly;
      for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] > 0.0 && y[i] > 0.0) {
          lx.push_back(x[i]);
          ly.push_back(y[i]);
        }
      }
      if (lx.size() >= 2) {
        const auto p = fit_power_law_loglog(lx, ly);
        m.parameters[0].initial = p.amplitude;
        m.parameters[1].initial = p.exponent;
      }
      break;
    }
    case ModelKind::sinusoid:
    case ModelKind::damped_sinusoid: {
      const double w = guess_frequency(x, y, frequency_hint);
      const auto lin = linear_sinusoid(x, y, w);
      m.parameter("amplitude").initial = std::hypot(lin.a, lin.b);
      m.parameter("frequency").initial = w;
      m.parameter("phase").initial = std::atan2(-lin.b, lin.a);
      m.parameter("offset").initial = lin.offset;
      if (kind == ModelKind::damped_sinusoid) {
        m.parameter("decay_time").initial = x[idx.back()] - x[idx.front()];
      }
      break;
    }
  }
  return m;
}

double FitResult::value(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return values(static_cast<long>(i));
  }
  throw ValidationError("fit", "no parameter named '" + std::string(name) + "'");
}

double FitResult::uncertainty(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return uncertainties(static_cast<long>(i));
  }
  throw ValidationError("fit", "no parameter named '" + std::string(name) + "'");
}

nlohmann::json FitResult::to_json() const {
  nlohmann::json params = nlohmann::json::array();
  for (std::size_t i = 0; i < names.size(); ++i) {
    const long k = static_cast<long>(i);
    params.push_back({{"name", names[i]}, {"value", values(k)}, {"uncertainty", uncertainties(k)}});
  }
  nlohmann::json cov = nlohmann::json::array();
  for (long r = 0; r < covariance.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (long c = 0; c < covariance.cols(); ++c) row.push_back(covariance(r, c));
    cov.push_back(row);
  }
  nlohmann::json doc{{"model", model},
                     {"parameters", params},
                     {"covariance", cov},
                     {"residual_norm", residual_norm},
                     {"initial_residual_norm", initial_residual_norm},
                     {"reduced_chi_square", reduced_chi_square},
                     {"iterations", iterations},
                     {"converged", converged},
                     {"message", message}};
  if (!model_comparison.empty()) doc["model_comparison"] = model_comparison;
  return doc;
}

FitResult levenberg_marquardt(const ResidualFn& residuals, const Eigen::VectorXd& initial,
                              const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                              const LmOptions& opt) {
  const long n = initial.size();
  Eigen::VectorXd scale(n);
  for (long j = 0; j < n; ++j) scale(j) = std::abs(initial(j)) > 1e-300 ? std::abs(initial(j)) : 1.0;
  const Eigen::VectorXd lo = lower.cwiseQuotient(scale);
  const Eigen::VectorXd hi = upper.cwiseQuotient(scale);
  auto clamp = [&](Eigen::VectorXd u) {
    for (long j = 0; j < n; ++j) u(j) = std::clamp(u(j), lo(j), hi(j));
    return u;
  };
  auto eval = [&](const Eigen::VectorXd& u) { return residuals(u.cwiseProduct(scale)); };
  auto cost_of = [](const Eigen::VectorXd& r) {
    const double c = r.squaredNorm();
    return std::isfinite(c) ? c : kInf;
  };

  FitResult out;
  Eigen::VectorXd u = clamp(initial.cwiseQuotient(scale));
  Eigen::VectorXd r = eval(u);
  const long m = r.size();
  double cost = cost_of(r);
  out.initial_residual_norm = std::sqrt(cost);
  if (!std::isfinite(cost)) {
    out.values = u.cwiseProduct(scale);
    out.uncertainties = Eigen::VectorXd::Zero(n);
    out.covariance = Eigen::MatrixXd::Zero(n, n);
    out.residual_norm = kInf;
    out.message = "residuals are not finite at the initial guess";
    return out;
  }

  const double eps_sqrt = std::sqrt(std::numeric_limits<double>::epsilon());
  auto jacobian = [&](const Eigen::VectorXd& at, bool& ok) {
    Eigen::MatrixXd jac(m, n);
    ok = true;
    for (long j = 0; j < n; ++j) {
      const double h = eps_sqrt * std::max(std::abs(at(j)), 1.0);
      Eigen::VectorXd up = at, dn = at;
      up(j) = std::min(at(j) + h, hi(j));
      dn(j) = std::max(at(j) - h, lo(j));
      const double width = up(j) - dn(j);
      if (width <= 0.0) {
        jac.col(j).setZero();
        continue;
      }
      const Eigen::VectorXd ru = eval(up);
      const Eigen::VectorXd rd = eval(dn);
      jac.col(j) = (ru - rd) / width;
      if (!jac.col(j).allFinite()) ok = false;
    }
    return jac;
  };

  double lambda = opt.initial_lambda;
  bool ok = true;
  Eigen::MatrixXd jac = jacobian(u, ok);
  int it = 0;
  for (; it < opt.max_iterations; ++it) {
    if (!ok) {
      out.message = "Jacobian is not finite";
      break;
    }
    if (cost == 0.0) {
      out.converged = true;
      out.message = "exact fit";
      break;
    }
    const Eigen::MatrixXd a = jac.transpose() * jac;
    const Eigen::VectorXd g = jac.transpose() * r;
    bool accepted = false;
    bool done = false;
    while (!accepted) {
      Eigen::MatrixXd damped = a;
      for (long j = 0; j < n; ++j) damped(j, j) += lambda * std::max(a(j, j), 1e-12);
      const Eigen::VectorXd step = damped.ldlt().solve(-g);
      const Eigen::VectorXd trial = clamp(u + step);
      const Eigen::VectorXd actual = trial - u;
      const Eigen::VectorXd r_trial = eval(trial);
      const double c_trial = cost_of(r_trial);
      if (c_trial < cost) {
        const double rel_step = actual.norm() / std::max(u.norm(), 1e-300);
        const double rel_cost = (cost - c_trial) / cost;
        u = trial;
        r = r_trial;
        cost = c_trial;
        lambda = std::max(lambda / 10.0, 1e-15);
        accepted = true;
        if (rel_step < opt.parameter_tolerance) {
          out.converged = true;
          out.message = "relative parameter step below tolerance";
          done = true;
        } else if (rel_cost < opt.residual_tolerance) {
          out.converged = true;
          out.message = "relative residual change below tolerance";
          done = true;
        }
      } else {
        lambda *= 10.0;
        if (lambda > 1e16 || actual.norm() < 1e-15 * std::max(u.norm(), 1e-300)) {
          // no downhill step left at machine precision: a minimum
          out.converged = true;
          out.message = "no further decrease possible";
          done = true;
          break;
        }
      }
    }
    if (done) break;
    jac = jacobian(u, ok);
  }
  if (it >= opt.max_iterations) out.message = "iteration limit reached";
  out.iterations = it + 1;

  // Covariance at the optimum, in physical units.
  jac = jacobian(u, ok);
  const Eigen::MatrixXd a = jac.transpose() * jac;
  // Finite-difference noise keeps dependent columns from being exactly
  // parallel, so the rank test needs a threshold well above epsilon.
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(jac.rows(), jac.cols());
  qr.setThreshold(1e-7);
  qr.compute(jac);
  out.values = u.cwiseProduct(scale);
  out.residual_norm = std::sqrt(cost);
  out.reduced_chi_square = m > n ? cost / static_cast<double>(m - n) : 0.0;
  out.covariance = Eigen::MatrixXd::Zero(n, n);
  out.uncertainties = Eigen::VectorXd::Zero(n);
  if (!ok || qr.rank() < n) {
    out.converged = false;
    out.message = ok ? "singular Jacobian: " + std::to_string(n - qr.rank()) +
                           " parameter direction(s) not identifiable"
                     : "Jacobian is not finite at the optimum";
    return out;
  }
  const Eigen::MatrixXd cov_u = a.inverse() * out.reduced_chi_square;
  out.covariance = scale.asDiagonal() * cov_u * scale.asDiagonal();
  out.uncertainties = out.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
  return out;
}

FitResult fit_curve(const CurveModel& model, std::span<const double> x, std::span<const double> y,
                    std::span<const double> sigma, const LmOptions& opt) {
  model.validate();
  std::vector<std::size_t> free;
  for (std::size_t j = 0; j < model.parameters.size(); ++j) {
    if (!model.parameters[j].fixed) free.push_back(j);
  }
  check_data(x, y, sigma, free.size() + 1);

  // Canonical point order so the result does not depend on how the data arrived.
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) {
    if (x[a] != x[b]) return x[a] < x[b];
    if (y[a] != y[b]) return y[a] < y[b];
    return !sigma.empty() && sigma[a] < sigma[b];
  });
  std::vector<double> xs, ys, ss;
  for (auto i : order) {
    xs.push_back(x[i]);
    ys.push_back(y[i]);
    if (!sigma.empty()) ss.push_back(sigma[i]);
  }
  x = xs;
  y = ys;
  sigma = ss;

  std::vector<double> full(model.parameters.size());
  for (std::size_t j = 0; j < full.size(); ++j) full[j] = model.parameters[j].initial;
  const long nf = static_cast<long>(free.size());
  Eigen::VectorXd p0(nf), lo(nf), hi(nf);
  for (long k = 0; k < nf; ++k) {
    const auto& p = model.parameters[free[static_cast<std::size_t>(k)]];
    p0(k) = p.initial;
    lo(k) = p.lower;
    hi(k) = p.upper;
  }
  auto residuals = [&](const Eigen::VectorXd& p) {
    std::vector<double> v = full;
    for (long k = 0; k < nf; ++k) v[free[static_cast<std::size_t>(k)]] = p(k);
    Eigen::VectorXd r(static_cast<long>(x.size()));
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double w = sigma.empty() ? 1.0 : 1.0 / sigma[i];
      r(static_cast<long>(i)) = w * (model.evaluate(x[i], v) - y[i]);
    }
    return r;
  };
  const FitResult inner = levenberg_marquardt(residuals, p0, lo, hi, opt);

  FitResult out = inner;
  out.model = std::string(to_string(model.kind));
  const long np = static_cast<long>(model.parameters.size());
  out.values = Eigen::VectorXd(np);
  out.uncertainties = Eigen::VectorXd::Zero(np);
  out.covariance = Eigen::MatrixXd::Zero(np, np);
  for (long j = 0; j < np; ++j) {
    out.names.push_back(model.parameters[static_cast<std::size_t>(j)].name);
    out.values(j) = full[static_cast<std::size_t>(j)];
  }
  for (long a = 0; a < nf; ++a) {
    const long ia = static_cast<long>(free[static_cast<std::size_t>(a)]);
    out.values(ia) = inner.values(a);
    out.uncertainties(ia) = inner.uncertainties(a);
    for (long b = 0; b < nf; ++b) {
      out.covariance(ia, static_cast<long>(free[static_cast<std::size_t>(b)])) =
          inner.covariance(a, b);
    }
  }
  return out;
}

FitResult compare_models(std::span<const ModelKind> kinds, std::span<const double> x,
                         std::span<const double> y, std::span<const double> sigma) {
  if (kinds.empty()) throw ValidationError("compare", "need at least one model");
  std::optional<FitResult> best;
  std::map<std::string, double> norms;
  for (ModelKind k : kinds) {
    FitResult r = fit_curve(CurveModel::guess(k, x, y), x, y, sigma);
    norms[r.model] = r.residual_norm;
    if (!best || r.residual_norm < best->residual_norm) best = std::move(r);
  }
  best->model_comparison = norms;
  return *best;
}

FringeFit fit_fringe(std::span<const double> x, std::span<const double> y,
                     std::optional<double> known_frequency, std::optional<double> frequency_hint) {
  check_data(x, y, {}, 4);
  FringeFit out;
  const auto idx = order_by_x(x);
  const double span = x[idx.back()] - x[idx.front()];
  if (known_frequency) {
    if (!(*known_frequency > 0.0)) throw ValidationError("frequency", "must be > 0");
    const auto lin = linear_sinusoid(x, y, *known_frequency);
    out.amplitude = std::hypot(lin.a, lin.b);
    out.phase = std::atan2(-lin.b, lin.a);
    out.offset = lin.offset;
    out.frequency = *known_frequency;
    out.fixed_frequency = true;
    out.residual_norm = std::sqrt(lin.rss);
    if (out.amplitude > 0.0) {
      const double va = lin.a / out.amplitude, vb = lin.b / out.amplitude;
      const double var = va * va * lin.covariance(0, 0) + vb * vb * lin.covariance(1, 1) +
                         2.0 * va * vb * lin.covariance(0, 1);
      out.amplitude_error = std::sqrt(std::max(var, 0.0));
    } else {
      out.amplitude_error = std::sqrt(std::max(lin.covariance(0, 0), 0.0));
    }
    return out;
  }
  CurveModel model = CurveModel::guess(ModelKind::sinusoid, x, y, frequency_hint);
  const FitResult r = fit_curve(model, x, y);
  double amp = r.value("amplitude");
  double phase = r.value("phase");
  if (amp < 0.0) {
    amp = -amp;
    phase += kPi;
  }
  out.amplitude = amp;
  out.amplitude_error = r.uncertainty("amplitude");
  out.phase = std::remainder(phase, 2.0 * kPi);
  out.offset = r.value("offset");
  out.frequency = r.value("frequency");
  out.frequency_error = r.uncertainty("frequency");
  out.fixed_frequency = false;
  out.residual_norm = r.residual_norm;
  const double period = 2.0 * kPi / out.frequency;
  double max_dx = 0.0;
  for (std::size_t k = 1; k < idx.size(); ++k) max_dx = std::max(max_dx, x[idx[k]] - x[idx[k - 1]]);
  if (span < 2.0 * period || max_dx > 0.25 * period) {
    throw ValidationError("data", "fringe trace under-sampled: need >= 2 periods and a step <= "
                                  "period/4 (period " + std::to_string(period) + ")");
  }
  return out;
}

PowerLawFit fit_power_law_loglog(std::span<const double> x, std::span<const double> y) {
  check_data(x, y, {}, 2);
  const long m = static_cast<long>(x.size());
  Eigen::MatrixXd design(m, 2);
  Eigen::VectorXd rhs(m);
  for (long i = 0; i < m; ++i) {
    if (!(x[i] > 0.0 && y[i] > 0.0)) {
      throw ValidationError("data", "log-log fit needs positive x and y");
    }
    design(i, 0) = std::log(x[i]);
    design(i, 1) = 1.0;
    rhs(i) = std::log(y[i]);
  }
  const Eigen::Vector2d c = design.colPivHouseholderQr().solve(rhs);
  PowerLawFit out;
  out.exponent = c(0);
  out.amplitude = std::exp(c(1));
  if (m > 2) {
    const double s2 = (design * c - rhs).squaredNorm() / static_cast<double>(m - 2);
    const Eigen::Matrix2d cov = s2 * (design.transpose() * design).inverse();
    out.exponent_error = std::sqrt(cov(0, 0));
    out.log_amplitude_error = std::sqrt(cov(1, 1));
  }
  return out;
}

}  // namespace donorspin
