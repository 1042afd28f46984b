#include "sonata/surrogates.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace sonata {

std::string to_string(SurrogateKind k) {
  switch (k) {
    case SurrogateKind::Linearization: return "linearization";
    case SurrogateKind::PartialLinearization: return "partial_linearization";
    case SurrogateKind::PartialConvexification: return "partial_convexification";
  }
  return "?";
}

SurrogateKind surrogate_kind_from_string(const std::string& s) {
  for (auto k : {SurrogateKind::Linearization, SurrogateKind::PartialLinearization,
                 SurrogateKind::PartialConvexification})
    if (to_string(k) == s) return k;
  throw std::invalid_argument("unknown surrogate '" + s + "'");
}

double SurrogateSpec::tau_for(int i) const {
  if (tau.size() == 1) return tau.front();
  return tau.at(static_cast<std::size_t>(i));
}

void SurrogateSpec::validate(int num_agents) const {
  if (tau.empty() || (tau.size() != 1 && tau.size() != static_cast<std::size_t>(num_agents)))
    throw std::invalid_argument("tau needs one shared value or one value per agent");
  for (double t : tau)
    if (!(t > 0.0)) throw std::invalid_argument("tau must be positive");
  if (!(inner_tolerance > 0.0)) throw std::invalid_argument("inner_tolerance must be positive");
  if (inner_max_iters < 1) throw std::invalid_argument("inner_max_iters must be positive");
  if (!(inner_gamma0 > 0.0 && inner_gamma0 <= 1.0))
    throw std::invalid_argument("inner_gamma0 must lie in (0,1]");
  if (!(inner_mu > 0.0 && inner_mu < 1.0)) throw std::invalid_argument("inner_mu must lie in (0,1)");
  if (!(inner_proximal > 0.0)) throw std::invalid_argument("inner_proximal must be positive");
  if (split < 0) throw std::invalid_argument("split must be nonnegative");
}

Vec soft_threshold(const Vec& x, double beta) {
  return (x.array().abs() - beta).max(0.0) * x.array().sign();
}

namespace {

bool keeps_whole_cost(const SurrogateSpec& spec, const SmoothLocalCost& f) {
  return spec.kind == SurrogateKind::PartialLinearization && f.is_convex();
}

Vec blend(const Vec& z, const Vec& x, int split) {
  Vec w = x;
  const int s = std::min<int>(split, static_cast<int>(x.size()));
  w.head(s) = z.head(s);
  return w;
}

}  // namespace

double surrogate_value(const SurrogateSpec& spec, const ProblemInstance& p, int i, const Vec& x_i,
                       const Vec& z) {
  const auto& f = *p.costs.at(i);
  const double tau = spec.tau_for(i);
  const Vec d = z - x_i;
  const double prox = 0.5 * tau * d.squaredNorm();
  if (spec.kind == SurrogateKind::PartialConvexification) {
    const int s = std::min<int>(spec.split, static_cast<int>(x_i.size()));
    const Vec g = f.gradient(x_i);
    const auto tail = static_cast<Eigen::Index>(x_i.size() - s);
    return f.value(blend(z, x_i, s)) + g.tail(tail).dot(d.tail(tail)) + prox;
  }
  if (keeps_whole_cost(spec, f)) return f.value(z) + prox;
  return f.value(x_i) + f.gradient(x_i).dot(d) + prox;
}

Vec surrogate_gradient(const SurrogateSpec& spec, const ProblemInstance& p, int i, const Vec& x_i,
                       const Vec& z) {
  const auto& f = *p.costs.at(i);
  const double tau = spec.tau_for(i);
  if (spec.kind == SurrogateKind::PartialConvexification) {
    const int s = std::min<int>(spec.split, static_cast<int>(x_i.size()));
    Vec g = f.gradient(x_i);
    g.head(s) = f.gradient(blend(z, x_i, s)).head(s);
    return g + tau * (z - x_i);
  }
  if (keeps_whole_cost(spec, f)) return f.gradient(z) + tau * (z - x_i);
  return f.gradient(x_i) + tau * (z - x_i);
}

double surrogate_lipschitz(const SurrogateSpec& spec, const ProblemInstance& p, int i) {
  const auto& f = *p.costs.at(i);
  const double tau = spec.tau_for(i);
  if (spec.kind == SurrogateKind::Linearization) return tau;
  if (spec.kind == SurrogateKind::PartialLinearization && !f.is_convex()) return tau;
  return tau + f.lipschitz();
}

double subproblem_objective(const SurrogateSpec& spec, const ProblemInstance& p, int i,
                            const Vec& x_i, const Vec& y_i, const Vec& z) {
  const double I = p.agents();
  const Vec pi_tilde = I * y_i - p.costs.at(i)->gradient(x_i);
  const Vec d = z - x_i;
  return surrogate_value(spec, p, i, x_i, z) - p.reg.grad_gminus(x_i).dot(d) + pi_tilde.dot(d) +
         p.reg.gplus(z);
}

Vec solve_subproblem_generic(const SurrogateSpec& spec, const ProblemInstance& p, int i,
                             const Vec& x_i, const Vec& y_i, const Vec* warm_start) {
  const double I = p.agents();
  const Vec linear = I * y_i - p.costs.at(i)->gradient(x_i) - p.reg.grad_gminus(x_i);
  auto grad = [&](const Vec& z) { return Vec(surrogate_gradient(spec, p, i, x_i, z) + linear); };
  InnerOptions opts;
  opts.tol = spec.inner_tolerance;
  opts.max_iters = spec.inner_max_iters;
  opts.gamma0 = spec.inner_gamma0;
  opts.mu = spec.inner_mu;
  opts.proximal = std::max(spec.inner_proximal, surrogate_lipschitz(spec, p, i));
  const Vec z0 = p.constraint.project(warm_start ? *warm_start : x_i);
  return inner_proximal_solver(grad, spec.tau_for(i), p.reg.lambda * p.reg.eta(), p.constraint, z0,
                               opts)
      .z;
}

Vec solve_subproblem(const SurrogateSpec& spec, const ProblemInstance& p, int i, const Vec& x_i,
                     const Vec& y_i) {
  const auto& f = *p.costs.at(i);
  const bool linear_model = spec.kind == SurrogateKind::Linearization ||
                            (spec.kind == SurrogateKind::PartialLinearization && !f.is_convex()) ||
                            (spec.kind == SurrogateKind::PartialConvexification && spec.split == 0);
  if (!linear_model) return solve_subproblem_generic(spec, p, i, x_i, y_i);
  const double tau = spec.tau_for(i);
  const double I = p.agents();
  const bool g_zero = p.reg.kind == RegKind::None || p.reg.lambda == 0.0;
  if (g_zero && p.constraint.kind == ConstraintKind::FullSpace && tau == I) return x_i - y_i;
  if (g_zero) return p.constraint.project(x_i - (I / tau) * y_i);
  const Vec pi_tilde = I * y_i - f.gradient(x_i);
  const Vec step = x_i - (f.gradient(x_i) + pi_tilde - p.reg.grad_gminus(x_i)) / tau;
  return p.constraint.prox_l1(step, p.reg.lambda * p.reg.eta() / tau);
}

InnerResult inner_proximal_solver(const std::function<Vec(const Vec&)>& smooth_grad,
                                  double strong_convexity_tau, double gplus_weight,
                                  const ConstraintSet& constraint, const Vec& z0,
                                  const InnerOptions& opts) {
  if (!(strong_convexity_tau > 0.0)) throw std::invalid_argument("inner solver needs tau > 0");
  if (!(opts.proximal > 0.0)) throw std::invalid_argument("inner solver needs a positive proximal weight");
  InnerResult res;
  res.z = constraint.project(z0);
  double gamma = opts.gamma0;
  for (int r = 0;; ++r) {
    const Vec g = smooth_grad(res.z);
    res.residual = (res.z - constraint.prox_l1(res.z - g, gplus_weight)).lpNorm<Eigen::Infinity>();
    res.iterations = r;
    if (res.residual <= opts.tol) return res;
    if (r >= opts.max_iters)
    {
      std::ostringstream msg;
      msg << "inner solver hit " << opts.max_iters << " iterations with residual " << res.residual;
      throw SubproblemError(msg.str(), res.residual);
    }
    const Vec z_hat =
        constraint.prox_l1(res.z - g / opts.proximal, gplus_weight / opts.proximal);
    res.z += gamma * (z_hat - res.z);
    gamma *= 1.0 - opts.mu * gamma;
  }
}

}  // namespace sonata
