#include "sonata/algorithm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sonata/metrics.hpp"

namespace sonata {

StepSizeSchedule StepSizeSchedule::constant(double a) {
  StepSizeSchedule s;
  s.kind = StepKind::Constant;
  s.alpha = a;
  return s;
}

StepSizeSchedule StepSizeSchedule::power(double a0, double b) {
  StepSizeSchedule s;
  s.kind = StepKind::DiminishingPower;
  s.alpha0 = a0;
  s.beta = b;
  return s;
}

StepSizeSchedule StepSizeSchedule::recursive(double a0, double m) {
  StepSizeSchedule s;
  s.kind = StepKind::DiminishingRecursive;
  s.alpha0 = a0;
  s.mu = m;
  return s;
}

void StepSizeSchedule::validate(int num_agents) const {
  switch (kind) {
    case StepKind::Constant:
      if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("constant step must lie in (0,1]");
      break;
    case StepKind::DiminishingPower:
      if (!(alpha0 > 0.0 && alpha0 <= 1.0)) throw ConfigError("alpha0 must lie in (0,1]");
      if (!(beta > 0.5 && beta <= 1.0)) throw ConfigError("beta must lie in (0.5,1]");
      break;
    case StepKind::DiminishingRecursive:
      if (!(alpha0 > 0.0 && alpha0 <= 1.0)) throw ConfigError("alpha0 must lie in (0,1]");
      if (!(mu > 0.0 && mu < 1.0)) throw ConfigError("mu must lie in (0,1)");
      break;
  }
  if (!agent_scale.empty()) {
    if (agent_scale.size() != static_cast<std::size_t>(num_agents))
      throw ConfigError("per-agent step scales need one entry per agent");
    for (double s : agent_scale)
      if (!(s > 0.0 && s <= 1.0)) throw ConfigError("per-agent step scales must lie in (0,1]");
  }
}

std::vector<double> StepSizeSchedule::values(std::size_t count) const {
  std::vector<double> out(count);
  double a = alpha0;
  for (std::size_t n = 0; n < count; ++n) {
    switch (kind) {
      case StepKind::Constant: out[n] = alpha; break;
      case StepKind::DiminishingPower:
        out[n] = alpha0 / std::pow(static_cast<double>(n + 1), beta);
        break;
      case StepKind::DiminishingRecursive:
        out[n] = a;
        a *= 1.0 - mu * a;
        break;
    }
  }
  return out;
}

double StepSizeSchedule::at(std::size_t n) const { return values(n + 1).back(); }

double StepSizeSchedule::scale_for(int i) const {
  return agent_scale.empty() ? 1.0 : agent_scale.at(static_cast<std::size_t>(i));
}

std::string to_string(StepKind k) {
  switch (k) {
    case StepKind::Constant: return "constant";
    case StepKind::DiminishingPower: return "power";
    case StepKind::DiminishingRecursive: return "recursive";
  }
  return "?";
}

StepKind step_kind_from_string(const std::string& s) {
  for (auto k : {StepKind::Constant, StepKind::DiminishingPower, StepKind::DiminishingRecursive})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown step rule '" + s + "'");
}

std::string to_string(Mixing m) { return m == Mixing::ATC ? "atc" : "caa"; }
std::string to_string(WeightRule w) { return w == WeightRule::PushSum ? "push_sum" : "metropolis"; }

std::string to_string(Preset p) {
  switch (p) {
    case Preset::None: return "none";
    case Preset::SonataL: return "sonata_l";
    case Preset::NextL: return "next_l";
    case Preset::AugDGM: return "aug_dgm";
    case Preset::DIGing: return "diging";
    case Preset::PushDIGing: return "push_diging";
    case Preset::AddOpt: return "add_opt";
  }
  return "?";
}

Mixing mixing_from_string(const std::string& s) {
  if (s == "atc") return Mixing::ATC;
  if (s == "caa") return Mixing::CAA;
  throw ConfigError("unknown mixing '" + s + "'");
}

WeightRule weight_rule_from_string(const std::string& s) {
  if (s == "push_sum") return WeightRule::PushSum;
  if (s == "metropolis") return WeightRule::Metropolis;
  throw ConfigError("unknown weight rule '" + s + "'");
}

Preset preset_from_string(const std::string& s) {
  for (auto p : {Preset::None, Preset::SonataL, Preset::NextL, Preset::AugDGM, Preset::DIGing,
                 Preset::PushDIGing, Preset::AddOpt})
    if (to_string(p) == s) return p;
  throw ConfigError("unknown preset '" + s + "'");
}

AlgorithmConfig apply_preset(Preset preset, int num_agents) {
  AlgorithmConfig c;
  c.preset = preset;
  if (preset == Preset::None) return c;
  c.surrogate.kind = SurrogateKind::Linearization;
  c.surrogate.tau = {static_cast<double>(num_agents)};
  switch (preset) {
    case Preset::SonataL:
    case Preset::PushDIGing:
      c.weights = WeightRule::PushSum;
      c.mixing = Mixing::ATC;
      break;
    case Preset::AddOpt:
      c.weights = WeightRule::PushSum;
      c.mixing = Mixing::CAA;
      break;
    case Preset::NextL:
    case Preset::AugDGM:
      c.weights = WeightRule::Metropolis;
      c.mixing = Mixing::ATC;
      break;
    case Preset::DIGing:
      c.weights = WeightRule::Metropolis;
      c.mixing = Mixing::CAA;
      break;
    case Preset::None:
      break;
  }
  return c;
}

WeightMatrix build_weights(WeightRule rule, const DigraphSnapshot& g) {
  return rule == WeightRule::PushSum ? build_push_sum_weights(g) : build_metropolis_weights(g);
}

namespace {

Mat local_gradients(const ProblemInstance& p, const Mat& x) {
  Mat g(x.rows(), x.cols());
  for (int i = 0; i < p.agents(); ++i) g.col(i) = p.costs[i]->gradient(x.col(i));
  return g;
}

}  // namespace

ConsensusState initial_state(const ProblemInstance& p, const Mat& x0) {
  if (x0.cols() != p.agents() || x0.rows() != p.dim())
    throw std::invalid_argument("initial point has the wrong shape");
  ConsensusState s = make_state(x0);
  s.y = local_gradients(p, x0);
  return s;
}

ConsensusState sonata_iteration(const ConsensusState& s, const AlgorithmConfig& cfg,
                                const ProblemInstance& p, const WeightMatrix& A, double alpha,
                                IterationDetail* detail) {
  const int I = s.agents();
  if (p.agents() != I) throw std::invalid_argument("state and problem disagree on agents");
  if (cfg.mixing == Mixing::CAA && p.constraint.kind != ConstraintKind::FullSpace)
    throw ConfigError("CAA mixing is only supported without constraints");

  Mat x_tilde(s.dim(), I);
  for (int i = 0; i < I; ++i)
    x_tilde.col(i) = solve_subproblem(cfg.surrogate, p, i, s.x.col(i), s.y.col(i));

  Vec step(I);
  for (int i = 0; i < I; ++i) step[i] = alpha * cfg.schedule.scale_for(i);

  ConsensusState out;
  out.phi = A.entries * s.phi;
  if (cfg.mixing == Mixing::ATC) {
    const Mat half = s.x + (x_tilde - s.x) * step.asDiagonal();
    out.x = condensed_mix(A.entries, half, s.phi, out.phi);
  } else {
    const Vec w = step.cwiseProduct(s.phi).cwiseQuotient(out.phi);
    out.x = condensed_mix(A.entries, s.x, s.phi, out.phi) + (x_tilde - s.x) * w.asDiagonal();
  }
  const Mat g_old = local_gradients(p, s.x);
  const Mat g_new = local_gradients(p, out.x);
  out.y = condensed_mix(A.entries, s.y, s.phi, out.phi) +
          (g_new - g_old) * out.phi.cwiseInverse().asDiagonal();
  if (detail) detail->x_tilde = std::move(x_tilde);
  return out;
}

TraceRecord make_record(const ProblemInstance& p, const ConsensusState& s, std::uint64_t iter,
                        std::uint64_t exchanges, double alpha) {
  TraceRecord r;
  r.iter = iter;
  r.message_exchanges = exchanges;
  r.alpha = alpha;
  const MeritReport m = merit_report(p, s.x);
  r.J = m.J;
  r.J_inf = m.J_inf;
  r.D = m.D;
  r.D_inf = m.D_inf;
  r.M = m.M;
  r.NMSE = m.NMSE.value_or(std::numeric_limits<double>::quiet_NaN());
  r.consensus_error = disagreement(s.x, s.phi);
  r.tracking_error = disagreement(s.y, s.phi);
  r.U_of_mean = p.U(s.x.rowwise().mean());
  return r;
}

RunResult run(const ProblemInstance& p, const AlgorithmConfig& cfg, const GraphSequence& seq,
              const RunOptions& opts, std::uint64_t seed) {
  p.validate();
  cfg.surrogate.validate(p.agents());
  cfg.schedule.validate(p.agents());
  if (seq.num_agents != p.agents()) throw ConfigError("graph and problem disagree on agents");
  if (opts.log_every < 1) throw ConfigError("log_every must be positive");
  if (cfg.mixing == Mixing::CAA && p.constraint.kind != ConstraintKind::FullSpace)
    throw ConfigError("CAA mixing is only supported without constraints");

  const Mat x0 = opts.x0 ? *opts.x0 : p.initial_point(seed);
  for (int i = 0; i < p.agents(); ++i)
    if (!p.constraint.contains(x0.col(i), 1e-10))
      throw std::invalid_argument("initial point lies outside the constraint set");

  RunResult res;
  ConsensusState s = initial_state(p, x0);
  const std::vector<double> alphas = cfg.schedule.values(opts.n_iters + 1);
  std::uint64_t exchanges = 0;
  res.trace.push_back(make_record(p, s, 0, 0, alphas[0]));

  for (std::uint64_t n = 0; n < opts.n_iters; ++n) {
    const DigraphSnapshot g = generate_snapshot(seq, n);
    WeightMatrix A;
    try {
      A = build_weights(cfg.weights, g);
    } catch (const AsymmetricGraphError& e) {
      throw ConfigError("preset '" + to_string(cfg.preset) +
                        "' needs doubly stochastic weights on an undirected graph: " + e.what());
    }
    IterationDetail detail;
    ConsensusState next = sonata_iteration(s, cfg, p, A, alphas[n], &detail);
    if (opts.keep_samples)
      res.samples.push_back({n, s.x, s.phi, s.y, std::move(detail.x_tilde), alphas[n]});
    s = std::move(next);
    exchanges += g.num_links();
    const std::uint64_t iter = n + 1;
    const bool last = iter == opts.n_iters;
    if (iter % opts.log_every == 0 || last || opts.stop_tolerance > 0.0) {
      TraceRecord r = make_record(p, s, iter, exchanges, alphas[iter]);
      const bool stop = opts.stop_tolerance > 0.0 && r.M <= opts.stop_tolerance;
      if (iter % opts.log_every == 0 || last || stop) res.trace.push_back(r);
      if (stop) break;
    }
  }
  res.final_state = std::move(s);
  return res;
}

StepBoundParams make_step_bound_params(const ProblemInstance& p, const SurrogateSpec& spec,
                                       const NetworkConstants& net, double sigma) {
  StepBoundParams b;
  const int I = p.agents();
  b.L = p.L_sum();
  b.L_mx = p.L_max();
  b.L_G = p.reg.lipschitz_grad_gminus();
  double lt = 0.0, ct = std::numeric_limits<double>::infinity();
  for (int i = 0; i < I; ++i) {
    lt = std::max(lt, spec.tau_for(i) + p.costs[i]->lipschitz());
    ct = std::min(ct, spec.tau_for(i));
  }
  b.Ltilde_mx = lt + b.L_G;
  b.c_tau = ct;
  b.c_L = (b.L * std::sqrt(static_cast<double>(I)) + b.L_mx + b.Ltilde_mx) / I;
  b.sigma = sigma;
  b.net = net;
  return b;
}

double constant_step_bound(const StepBoundParams& b) {
  if (!(b.sigma > 0.0 && b.sigma < 1.0)) throw std::invalid_argument("sigma must lie in (0,1)");
  const NetworkConstants& k = b.net;
  if (!k.b_bar_finite()) return 0.0;  // the certified horizon is numerically unbounded
  const double I = k.I;
  const double Bb = k.B_bar;
  const double c = k.c;
  const double gap = 1.0 - k.rho_Bbar;
  const double s2 = 1.0 - b.sigma * b.sigma;
  const double first = gap * b.sigma / (std::sqrt(2.0) * c * Bb);
  const double inner = (b.L + b.L_G) / I + 2.0 * b.c_L * Bb * c / gap * std::sqrt(2.0 / s2) +
                       12.0 * b.L_mx / k.phi_lb * Bb * Bb * c * c / (gap * gap) * std::sqrt(1.0 / s2);
  const double second = 2.0 * b.c_tau * k.phi_lb / (I * k.phi_ub) / inner;
  return std::min(first, second);
}

LyapunovConstants lyapunov_constants(const StepBoundParams& b) {
  const NetworkConstants& net = b.net;
  if (!net.b_bar_finite() || net.B_bar > 1e6)
    throw std::invalid_argument("Lyapunov diagnostics need a small finite B_bar");
  LyapunovConstants k;
  k.B_bar = static_cast<int>(net.B_bar);
  k.phi_lb = net.phi_lb;
  k.phi_ub = net.phi_ub;
  const double Bb = k.B_bar;
  const double rho = net.rho_Bbar;
  const double c = net.c;
  k.epsilon = (1.0 - rho) / (rho * Bb);
  k.rho_tilde = rho * rho * (1.0 + Bb * k.epsilon);
  k.c_delta = (1.0 / k.epsilon + Bb) * 2.0 * Bb * c * c / (1.0 - k.rho_tilde);
  k.c_perp = k.c_delta * b.L_mx * b.L_mx / (k.phi_lb * k.phi_lb);
  k.mu_min = 1.0 - b.sigma * b.sigma;
  k.alpha_mx = b.sigma * std::sqrt((1.0 - k.rho_tilde) / (2.0 * Bb * (Bb + 1.0 / k.epsilon) * c * c));
  k.eps_x = std::sqrt(k.c_delta / k.mu_min);
  k.eps_y = std::sqrt(9.0 * k.c_perp * k.c_delta / k.mu_min);
  k.c_L = b.c_L;
  return k;
}

std::vector<LyapunovPoint> lyapunov_diagnostics(const ProblemInstance& p,
                                                const std::vector<DiagnosticSample>& window,
                                                const LyapunovConstants& k) {
  const std::size_t Bb = static_cast<std::size_t>(k.B_bar);
  if (window.size() < 2 * Bb) throw std::invalid_argument("Lyapunov window shorter than 2 B_bar");
  const std::size_t len = window.size();
  std::vector<double> U(len), ex(len), ey(len), edx(len);
  for (std::size_t t = 0; t < len; ++t) {
    const auto& s = window[t];
    const Vec xbar = weighted_average(s.x, s.phi);
    U[t] = p.U(xbar);
    ex[t] = std::pow(disagreement(s.x, s.phi), 2);
    ey[t] = std::pow(disagreement(s.y, s.phi), 2);
    edx[t] = s.x_tilde.size() ? s.alpha * s.alpha * (s.x_tilde.colwise() - xbar).squaredNorm() : 0.0;
  }
  const double rt = k.rho_tilde;
  const double y_coef = k.phi_ub / 2.0 / k.eps_y;
  const double x_coef = k.phi_ub / (2.0 * k.mu_min) *
                        (k.c_L / k.eps_x + k.c_perp * std::pow(2.0 + k.alpha_mx, 2) / k.eps_y);
  std::vector<LyapunovPoint> out;
  for (std::size_t n = 0; n + Bb <= len; ++n) {
    LyapunovPoint pt;
    pt.iter = window[n].iter;
    double wx = 0.0, wy = 0.0;
    for (std::size_t j = 0; j < Bb; ++j) {
      const double kk = static_cast<double>(j);
      const double w = (kk + 1.0 + (static_cast<double>(Bb) - kk - 1.0) * rt) / (1.0 - rt);
      pt.U_part += U[n + j];
      wx += w * ex[n + j];
      wy += w * ey[n + j];
      pt.E_dx += edx[n + j];
    }
    pt.y_part = y_coef * wy;
    pt.x_part = x_coef * wx;
    pt.V = pt.U_part + pt.y_part + pt.x_part;
    pt.E_x = ex[n];
    pt.E_y = ey[n];
    out.push_back(pt);
  }
  return out;
}

}  // namespace sonata
