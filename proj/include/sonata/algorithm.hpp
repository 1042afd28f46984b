#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sonata/consensus.hpp"
#include "sonata/surrogates.hpp"

namespace sonata {

enum class StepKind { Constant, DiminishingPower, DiminishingRecursive };

struct StepSizeSchedule {
  StepKind kind = StepKind::DiminishingRecursive;
  double alpha = 0.1;    // Constant
  double alpha0 = 0.5;   // both diminishing rules
  double beta = 1.0;     // DiminishingPower
  double mu = 0.01;      // DiminishingRecursive
  std::vector<double> agent_scale;  // optional per-agent multipliers, length I

  static StepSizeSchedule constant(double a);
  static StepSizeSchedule power(double a0, double b);
  static StepSizeSchedule recursive(double a0, double m);

  void validate(int num_agents) const;
  std::vector<double> values(std::size_t count) const;  // alpha^0 .. alpha^{count-1}
  double at(std::size_t n) const;
  double scale_for(int i) const;
  bool operator==(const StepSizeSchedule&) const = default;
};

std::string to_string(StepKind k);
StepKind step_kind_from_string(const std::string& s);

enum class Mixing { ATC, CAA };
enum class WeightRule { PushSum, Metropolis };
enum class Preset { None, SonataL, NextL, AugDGM, DIGing, PushDIGing, AddOpt };

std::string to_string(Mixing m);
std::string to_string(WeightRule w);
std::string to_string(Preset p);
Mixing mixing_from_string(const std::string& s);
WeightRule weight_rule_from_string(const std::string& s);
Preset preset_from_string(const std::string& s);

struct AlgorithmConfig {
  SurrogateSpec surrogate;
  StepSizeSchedule schedule;
  Mixing mixing = Mixing::ATC;
  WeightRule weights = WeightRule::PushSum;
  Preset preset = Preset::None;
  bool operator==(const AlgorithmConfig&) const = default;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Linearized surrogate with tau = I plus the mixing and weight rule each special case fixes.
AlgorithmConfig apply_preset(Preset preset, int num_agents);

WeightMatrix build_weights(WeightRule rule, const DigraphSnapshot& g);

// Initial data: phi = 1, y_i = grad f_i(x_i).
ConsensusState initial_state(const ProblemInstance& p, const Mat& x0);

struct IterationDetail {
  Mat x_tilde;  // local subproblem solutions, one column per agent
};

ConsensusState sonata_iteration(const ConsensusState& s, const AlgorithmConfig& cfg,
                                const ProblemInstance& p, const WeightMatrix& A, double alpha,
                                IterationDetail* detail = nullptr);

struct TraceRecord {
  std::uint64_t iter = 0;
  std::uint64_t message_exchanges = 0;
  double alpha = 0.0;
  double J = 0.0;
  double J_inf = 0.0;
  double D = 0.0;
  double D_inf = 0.0;
  double M = 0.0;
  double NMSE = 0.0;  // NaN without ground truth
  double consensus_error = 0.0;
  double tracking_error = 0.0;
  double U_of_mean = 0.0;
};

// Raw per-iteration data needed by the Lyapunov diagnostics.
struct DiagnosticSample {
  std::uint64_t iter = 0;
  Mat x;
  Vec phi;
  Mat y;
  Mat x_tilde;
  double alpha = 0.0;
};

struct RunOptions {
  std::uint64_t n_iters = 0;
  std::uint64_t log_every = 1;
  double stop_tolerance = 0.0;  // stop once M <= tolerance; 0 disables
  std::optional<Mat> x0;        // defaults to the problem's initialization rule
  bool keep_samples = false;    // fill RunResult::samples at every iteration
};

struct RunResult {
  std::vector<TraceRecord> trace;
  std::vector<DiagnosticSample> samples;
  ConsensusState final_state;
};

RunResult run(const ProblemInstance& p, const AlgorithmConfig& cfg, const GraphSequence& seq,
              const RunOptions& opts, std::uint64_t seed);

TraceRecord make_record(const ProblemInstance& p, const ConsensusState& s, std::uint64_t iter,
                        std::uint64_t exchanges, double alpha);

struct StepBoundParams {
  double L = 0.0;
  double L_mx = 0.0;
  double Ltilde_mx = 0.0;
  double c_tau = 0.0;
  double c_L = 0.0;
  double L_G = 0.0;
  double sigma = 0.5;
  NetworkConstants net;
};

StepBoundParams make_step_bound_params(const ProblemInstance& p, const SurrogateSpec& spec,
                                       const NetworkConstants& net, double sigma);
double constant_step_bound(const StepBoundParams& b);

struct LyapunovConstants {
  int B_bar = 1;
  double phi_lb = 1.0;
  double phi_ub = 1.0;
  double epsilon = 0.0;
  double rho_tilde = 0.0;
  double c_delta = 0.0;
  double c_perp = 0.0;
  double mu_min = 0.0;
  double alpha_mx = 0.0;
  double eps_x = 0.0;
  double eps_y = 0.0;
  double c_L = 0.0;
};

// Needs a finite B_bar.
LyapunovConstants lyapunov_constants(const StepBoundParams& b);

struct LyapunovPoint {
  std::uint64_t iter = 0;
  double V = 0.0;
  double U_part = 0.0;
  double y_part = 0.0;
  double x_part = 0.0;
  double E_dx = 0.0;  // sum over the block of alpha^2 ||x_tilde - 1 (x) x_phi||^2
  double E_x = 0.0;   // ||e_x||^2 at iter
  double E_y = 0.0;   // ||e_y||^2 at iter
};

// One point per start index n with samples n .. n + B_bar - 1 available.
std::vector<LyapunovPoint> lyapunov_diagnostics(const ProblemInstance& p,
                                                const std::vector<DiagnosticSample>& window,
                                                const LyapunovConstants& k);

}  // namespace sonata
