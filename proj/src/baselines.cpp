#include "sonata/baselines.hpp"

#include <limits>

#include "sonata/metrics.hpp"

namespace sonata {

std::string to_string(BaselineKind k) {
  return k == BaselineKind::SubgradientPush ? "subgradient_push" : "gradient_projection";
}

BaselineKind baseline_kind_from_string(const std::string& s) {
  if (s == "subgradient_push") return BaselineKind::SubgradientPush;
  if (s == "gradient_projection") return BaselineKind::GradientProjection;
  throw ConfigError("unknown baseline '" + s + "'");
}

ConsensusState subgradient_push_step(const ConsensusState& s, const WeightMatrix& A,
                                     const ProblemInstance& p, double alpha) {
  if (p.constraint.kind != ConstraintKind::FullSpace)
    throw ConfigError("subgradient-push handles unconstrained problems only");
  const int I = s.agents();
  const double share = 1.0 / I;
  const double eta = p.reg.eta() * p.reg.lambda;
  ConsensusState out;
  out.phi = A.entries * s.phi;
  const Mat mixed = condensed_mix(A.entries, s.x, s.phi, out.phi);
  out.x = mixed;
  for (int i = 0; i < I; ++i) {
    const Vec v = mixed.col(i);
    // sign(0) = 0 picks the zero subgradient of |.| at the origin.
    const Vec sub = p.costs[i]->gradient(v) +
                    share * (eta * v.array().sign().matrix() - p.reg.grad_gminus(v));
    out.x.col(i) -= alpha / out.phi[i] * sub;
  }
  out.y = s.y;
  return out;
}

ConsensusState gradient_projection_step(const ConsensusState& s, const WeightMatrix& A,
                                        const ProblemInstance& p, double alpha) {
  if (p.reg.kind != RegKind::None && p.reg.lambda != 0.0)
    throw ConfigError("gradient projection needs a smooth problem (no regularizer)");
  ConsensusState out;
  out.phi = A.entries * s.phi;
  const Mat mixed = condensed_mix(A.entries, s.x, s.phi, out.phi);
  out.x = mixed;
  for (int i = 0; i < s.agents(); ++i) {
    const Vec v = mixed.col(i);
    out.x.col(i) = p.constraint.project(v - alpha * p.costs[i]->gradient(v));
  }
  out.y = s.y;
  return out;
}

RunResult run_baseline(const ProblemInstance& p, const BaselineConfig& cfg,
                       const GraphSequence& seq, const RunOptions& opts, std::uint64_t seed) {
  p.validate();
  cfg.schedule.validate(p.agents());
  if (cfg.schedule.kind == StepKind::Constant)
    throw ConfigError("baselines run with a diminishing step rule");
  if (seq.num_agents != p.agents()) throw ConfigError("graph and problem disagree on agents");
  if (opts.log_every < 1) throw ConfigError("log_every must be positive");

  const Mat x0 = opts.x0 ? *opts.x0 : p.initial_point(seed);
  RunResult res;
  ConsensusState s = make_state(x0);
  const std::vector<double> alphas = cfg.schedule.values(opts.n_iters + 1);
  auto record = [&](std::uint64_t iter, std::uint64_t ex, double a) {
    TraceRecord r = make_record(p, s, iter, ex, a);
    r.tracking_error = std::numeric_limits<double>::quiet_NaN();
    return r;
  };
  std::uint64_t exchanges = 0;
  res.trace.push_back(record(0, 0, alphas[0]));
  for (std::uint64_t n = 0; n < opts.n_iters; ++n) {
    const DigraphSnapshot g = generate_snapshot(seq, n);
    WeightMatrix A;
    try {
      A = build_weights(cfg.weights, g);
    } catch (const AsymmetricGraphError& e) {
      throw ConfigError(std::string("baseline weights: ") + e.what());
    }
    s = cfg.kind == BaselineKind::SubgradientPush ? subgradient_push_step(s, A, p, alphas[n])
                                                  : gradient_projection_step(s, A, p, alphas[n]);
    exchanges += g.num_links();
    const std::uint64_t iter = n + 1;
    const bool last = iter == opts.n_iters;
    if (iter % opts.log_every == 0 || last || opts.stop_tolerance > 0.0) {
      const TraceRecord r = record(iter, exchanges, alphas[iter]);
      const bool stop = opts.stop_tolerance > 0.0 && r.M <= opts.stop_tolerance;
      if (iter % opts.log_every == 0 || last || stop) res.trace.push_back(r);
      if (stop) break;
    }
  }
  res.final_state = std::move(s);
  return res;
}

}  // namespace sonata
