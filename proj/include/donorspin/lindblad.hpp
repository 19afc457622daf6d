#pragma once

#include <Eigen/Core>
#include <array>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "donorspin/hamiltonian.hpp"

namespace donorspin {

// Four-level density matrix over (|down>, |up>, |trion down>, |trion up>).
// Construction does not validate; call diagnose() / require_physical().
class DensityMatrix {
 public:
  DensityMatrix();  // |down><down|
  explicit DensityMatrix(const Matrix4c& m) : m_(m) {}

  static DensityMatrix pure(Level level);
  static DensityMatrix from_populations(const Eigen::Vector4d& p);

  const Matrix4c& matrix() const { return m_; }
  double population(Level level) const { return m_(level, level).real(); }
  Eigen::Vector4d populations() const;

 private:
  Matrix4c m_;
};

struct StateDiagnostics {
  double trace_error = 0.0;        // |Tr rho - 1|
  double hermiticity_error = 0.0;  // max |rho - rho^dagger|
  double min_eigenvalue = 0.0;
  double purity = 0.0;             // Tr rho^2
};

StateDiagnostics diagnose(const Matrix4c& rho);

inline constexpr double kTraceTolerance = 1e-9;
inline constexpr double kHermiticityTolerance = 1e-10;
inline constexpr double kPositivityTolerance = 1e-7;

// Throws NumericalError if rho violates the state invariants.
void require_physical(const Matrix4c& rho, double time);

// Phenomenological ground-coherence decay injected on top of the Lindblad
// channels: exp(-(t - origin)/T) or exp(-((t - origin)/T)^3).
struct InjectedDephasing {
  enum class Kind { none, exponential, cubed_exponential };
  Kind kind = Kind::none;
  double decay_time = std::numeric_limits<double>::infinity();
  double origin = 0.0;

  double rate(double t) const;
  // Integral of rate over [a, b].
  double integral(double a, double b) const;
};

struct DissipatorSet {
  double radiative_rate = 0.0;  // total decay rate of each excited state, s^-1
  // branching[e][g]: fraction of excited state e (0 = trion down, 1 = trion up)
  // decaying into ground state g (0 = down, 1 = up). Rows sum to 1.
  std::array<std::array<double, 2>, 2> branching{{{0.5, 0.5}, {0.5, 0.5}}};
  double t1_rate = 0.0;                // ground population relaxation toward 1/2, 1/2
  double ground_dephasing_rate = 0.0;  // decay rate of the down/up coherence
  double beta1 = 0.0;                  // gamma = beta1 Omega_R + beta2 Omega_R^2
  double beta2 = 0.0;                  // s/rad
  InjectedDephasing injected;

  double excited_dephasing(double rabi) const { return beta1 * rabi + beta2 * rabi * rabi; }
  void validate() const;  // throws ValidationError
};

enum class IntegratorMethod { adaptive_rk, matrix_exponential };

struct IntegratorConfig {
  IntegratorMethod method = IntegratorMethod::adaptive_rk;
  double rel_tol = 1e-9;
  double abs_tol = 1e-11;
  double max_step = std::numeric_limits<double>::infinity();
  double min_step = 1e-24;

  void validate() const;
};

// -i[H, rho] + sum_k (C rho C^+ - {C^+ C, rho}/2) for the channel set of `d`,
// with excited-state dephasing at gamma(instant_rabi) and the injected
// ground dephasing evaluated at time t.
Matrix4c lindblad_rhs(const Matrix4c& rho, const Matrix4c& h, const DissipatorSet& d,
                      double instant_rabi, double t = 0.0);

// Dissipator only (no Hamiltonian term).
Matrix4c apply_dissipator(const Matrix4c& rho, const DissipatorSet& d, double excited_dephasing,
                          double ground_dephasing);

// H(t) = diag(energies) + coupling(t) on [start, start + duration].
struct Segment {
  double start = 0.0;
  double duration = 0.0;
  Eigen::Vector4d energies = Eigen::Vector4d::Zero();
  std::function<Matrix4c(double)> coupling;  // off-diagonal part; empty means free evolution
  std::function<double(double)> rabi;        // Omega_R(t) feeding gamma(t); empty means 0
  bool time_independent = false;             // coupling and rabi are constant
  double max_step = 0.0;                     // 0: use the integrator setting

  double end() const { return start + duration; }
  bool is_free() const { return !coupling; }
};

Segment free_segment(const Eigen::Vector4d& energies, double start, double duration);
Segment free_segment(const LevelScheme& levels, double start, double duration);
// Envelope window of the pulse, max_step = duration / 50.
Segment pulse_segment(const LevelScheme& levels, const PulseSpec& pulse, double calibration_k);
// Several (possibly overlapping) pulses in one segment; intensities add.
Segment merged_pulse_segment(const LevelScheme& levels, std::vector<PulseSpec> pulses,
                             double calibration_k);
// Constant drive at Rabi frequency `rabi`.
Segment cw_segment(const LevelScheme& levels, const CouplingWeights& weights, double rabi,
                   double start, double duration);
// Arbitrary constant Hermitian H.
Segment constant_segment(const Matrix4c& h, double start, double duration, double rabi = 0.0);

struct TrajectorySample {
  double time = 0.0;
  Matrix4c rho;
};

struct Trajectory {
  std::vector<TrajectorySample> samples;
  DensityMatrix final_state;
  double final_time = 0.0;
  long steps = 0;
};

// Integrates the master equation over contiguous segments. Samples are taken
// at each requested time inside the span. Free segments are propagated
// analytically; time-independent segments by the exact Liouvillian
// exponential. Throws IntegrationError on step underflow and NumericalError
// on positivity violation.
Trajectory evolve(const DensityMatrix& rho0, std::span<const Segment> segments,
                  const DissipatorSet& d, const IntegratorConfig& cfg,
                  std::span<const double> sample_times = {});

// Same propagation applied to an arbitrary matrix, without state checks.
Matrix4c propagate(const Matrix4c& rho, std::span<const Segment> segments, const DissipatorSet& d,
                   const IntegratorConfig& cfg);

// Exact propagation with no drive from t0 to t1.
Matrix4c propagate_free(const Matrix4c& rho, const Eigen::Vector4d& energies,
                        const DissipatorSet& d, double t0, double t1);

using Superoperator = Eigen::Matrix<Complex, 16, 16>;

// Linear map rho(start) -> rho(end) of the given segments (column-major vec).
Superoperator segment_propagator(std::span<const Segment> segments, const DissipatorSet& d,
                                 const IntegratorConfig& cfg);
Matrix4c apply_map(const Superoperator& map, const Matrix4c& rho);

// Generator matrix of lindblad_rhs acting on column-major vec(rho).
Superoperator liouvillian(const Matrix4c& h, const DissipatorSet& d, double instant_rabi,
                          double t = 0.0);

// 1/T1(B) = (1/T1_ref) (B / B_ref)^exponent. Throws for non-positive inputs.
double t1_rate_model(double field, double reference_t1 = 0.1, double reference_field = 2.25,
                     double exponent = 3.5);

}  // namespace donorspin
