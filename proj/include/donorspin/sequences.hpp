#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "donorspin/bath.hpp"
#include "donorspin/fit.hpp"
#include "donorspin/hamiltonian.hpp"
#include "donorspin/lindblad.hpp"
#include "donorspin/materials.hpp"

namespace donorspin {

enum class ReadoutMode { population, photon_counts };
std::string_view to_string(ReadoutMode m);

struct PumpSettings {
  bool enabled = true;
  // Resonant cw drive on |up> <-> |trion down>. With a 1 ns radiative
  // lifetime this pumps at roughly Omega^2 / (2 Gamma) ~ 2e6 s^-1.
  double rabi = 2.0 * 3.14159265358979323846 * 10e6;
  double duration = 10e-6;
  double settle = 20e-9;  // dark time between pump end and the first pulse window
  int curve_points = 200;
};

// Rotation-angle spread across the collection spot: pulse energies are scaled
// by (1 + relative_sigma x), x standard normal, averaged on Gauss-Hermite nodes.
struct AngleSpread {
  double relative_sigma = 0.0;
  int nodes = 7;
  bool enabled() const { return relative_sigma > 0.0; }
};

struct ExperimentSetup {
  double g_electron = 1.97;
  double g_hole = 0.34;
  double field = 5.0;                             // T
  double detuning = 2.0 * 3.14159265358979323846 * 3.57e12;  // rad/s
  double calibration_k = 0.0;                     // integral Omega_R^2 dt = k E, rad^2 s^-1 J^-1
  PulseShape shape = PulseShape::gaussian;
  double pulse_duration = 1.9e-12;
  CouplingWeights coupling_weights = kBalancedCoupling;
  DissipatorSet dissipators;
  IntegratorConfig integrator;
  PumpSettings pump;
  ReadoutMode readout = ReadoutMode::population;
  double readout_duration = 20e-9;
  double readout_rabi = 2.0 * 3.14159265358979323846 * 100e6;
  AngleSpread angle_spread;
  int jobs = 0;

  double omega_e() const;
  // Level scheme with the electron splitting shifted by `zeeman_shift` (rad/s).
  LevelScheme levels(double zeeman_shift = 0.0) const;
  PulseSpec pulse(double energy, double arrival_time = 0.0) const;
  void validate() const;  // throws ValidationError listing every issue
  nlohmann::json to_json() const;
};

// Radiative rate 1/1 ns, balanced branching, T1 from t1_rate_model(field),
// no excited-state dephasing, k such that a far-detuned pulse of 40 pJ is a
// pi rotation in the small-splitting limit.
ExperimentSetup default_setup(const MaterialParams& m, double field);

// k for which the far-detuned estimate of the rotation angle at `energy` is
// `angle`: (k E / 2)(1/D + 1/(D + w_h)) = angle.
double calibration_for_angle(const ExperimentSetup& s, double energy, double angle);
// Inverse: energy giving `angle` at the setup's k.
double energy_for_angle(const ExperimentSetup& s, double angle);

// diag(1/2, 1/2, 0, 0) regardless of input.
DensityMatrix scramble(const DensityMatrix& rho);

struct PumpResult {
  DensityMatrix state;
  double fidelity = 0.0;             // population of |down>
  std::vector<double> curve_time;    // s, from pump start
  std::vector<double> photon_rate;   // radiative rate x excited population, s^-1
};

// Resonant optical pumping of |up> through |trion down>; evolution runs in
// the frame of the pump laser.
PumpResult optical_pump(const DensityMatrix& rho0, const ExperimentSetup& s, double rabi,
                        double duration);

// Pump from the scrambled state, then `settle` of dark evolution, expressed in
// the control-laser frame at the end time.
DensityMatrix prepared_state(const ExperimentSetup& s);

struct ExperimentTrace {
  std::string experiment;
  std::string abscissa_name;  // column name with unit suffix, e.g. "tau_s"
  std::vector<double> abscissa;
  std::vector<double> p_up;
  std::vector<double> p_down;
  std::vector<double> p_up_stderr;
  std::vector<double> photon_counts;  // photon_counts readout only
  nlohmann::json metadata = nlohmann::json::object();

  std::size_t size() const { return abscissa.size(); }
  // 0 <= p <= 1 and p_up + p_down <= 1, within numerical slack.
  void validate() const;
};

struct EnsembleOptions {
  long samples = 1;
  std::uint64_t seed = 1;
  // Pulse maps are otherwise interpolated quadratically in the bath shift
  // from exact maps at 0 and +-max|shift|.
  bool exact_pulse_maps = false;
};

struct SampleOutcome {
  std::vector<double> p_up;
  std::vector<double> p_down;
  std::vector<double> photon_counts;
};

struct EnsembleAverage {
  SampleOutcome mean;
  std::vector<double> p_up_stderr;  // zero for a single sample
};

// Runs `kernel` once per Overhauser sample (in parallel) and averages in
// sample order. Without a bath a single sample at zero shift is used.
EnsembleAverage ensemble_average(
    const std::function<SampleOutcome(const OverhauserSample&)>& kernel,
    const std::optional<BathModel>& bath, const EnsembleOptions& opt, int jobs);

// Single control pulse after pumping; one point per energy.
ExperimentTrace run_rabi_sweep(const ExperimentSetup& s, std::span<const double> energies,
                               const std::optional<BathModel>& bath = {},
                               const EnsembleOptions& ens = {});

struct FringeWindow {
  double center = 0.0;  // s
  double amplitude = 0.0;
  double amplitude_error = 0.0;
  double phase = 0.0;
};

// Delays `center + k step` for k < points, around each window centre.
struct DelayScan {
  std::vector<double> centers;
  double step = 0.0;
  int points = 16;

  std::vector<double> delays() const;
};

// step <= (2 pi / omega_e) / 8, else ValidationError with the largest allowed step.
void check_fringe_sampling(const ExperimentSetup& s, double step);

struct RamseyResult {
  ExperimentTrace trace;               // P_up against tau
  std::vector<FringeWindow> windows;   // V per window, fixed frequency omega_e
};

// Two identical pulses separated by tau.
RamseyResult run_ramsey(const ExperimentSetup& s, const DelayScan& scan, double pulse_energy,
                        const std::optional<BathModel>& bath = {},
                        const EnsembleOptions& ens = {});

struct EchoResult {
  ExperimentTrace trace;               // P_up against tau1 + tau2
  std::vector<FringeWindow> windows;   // centre = 2 tau1
};

// Three equal pulses at 0, tau1, tau1 + tau2 with tau2 = tau1 + dt, dt on a
// grid of `points` steps starting at -points/2 steps.
struct EchoScan {
  std::vector<double> tau1;
  double step = 0.0;
  int points = 16;
};

EchoResult run_echo(const ExperimentSetup& s, const EchoScan& scan, double pulse_energy,
                    const std::optional<BathModel>& bath = {}, const EnsembleOptions& ens = {});

struct T1Result {
  ExperimentTrace trace;
  FitResult fit;  // exp_decay with free offset on P_up
  double t1 = 0.0;
  double t1_error = 0.0;
};

// Pump, dark wait, readout.
T1Result run_t1_recovery(const ExperimentSetup& s, std::span<const double> waits);

// Rotation angle 2 asin(sqrt(P_up)) of one pulse acting on |down>, no dissipation.
double four_level_rotation_angle(const ExperimentSetup& s, double energy);

// Generic timeline. Control pulses carry absolute arrival times; the other
// steps run from the current clock. Overlapping pulse windows are merged.
struct PumpStep {
  double duration = 0.0;
  double rabi = 0.0;
};
struct ScrambleStep {};
struct ControlStep {
  PulseSpec pulse;
};
struct WaitStep {
  double duration = 0.0;
};
struct ReadoutStep {
  double duration = 0.0;  // photon counting under a cw drive when > 0
  double rabi = 0.0;
};
using SequenceStep = std::variant<PumpStep, ScrambleStep, ControlStep, WaitStep, ReadoutStep>;

struct SequenceSpec {
  double start_time = 0.0;
  std::vector<SequenceStep> steps;
  long bath_samples = 1;
  std::uint64_t seed = 1;

  void validate() const;
};

struct ReadoutValue {
  double time = 0.0;
  double p_up = 0.0;
  double p_down = 0.0;
  double photon_counts = 0.0;
};

// Runs the timeline on the thermal state (after an implicit scramble), all
// channels, including an injected one, inside every propagation.
std::vector<ReadoutValue> run_sequence(const ExperimentSetup& s, const SequenceSpec& spec,
                                       double zeeman_shift = 0.0);

// Mean over spec.bath_samples Overhauser samples drawn with spec.seed.
std::vector<ReadoutValue> run_sequence_ensemble(const ExperimentSetup& s,
                                                const SequenceSpec& spec,
                                                const std::optional<BathModel>& bath);

}  // namespace donorspin
