#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sonata/problems.hpp"

namespace sonata {

enum class SurrogateKind { Linearization, PartialLinearization, PartialConvexification };

std::string to_string(SurrogateKind k);
SurrogateKind surrogate_kind_from_string(const std::string& s);

struct SurrogateSpec {
  SurrogateKind kind = SurrogateKind::Linearization;
  std::vector<double> tau{1.5};  // one entry shared by all agents, or one per agent
  // PartialConvexification: coordinates [0, split) are kept, the rest are linearized.
  int split = 0;
  double inner_tolerance = 1e-8;
  int inner_max_iters = 100000;
  double inner_gamma0 = 0.5;
  double inner_mu = 0.01;
  double inner_proximal = 2.0;  // lower bound on the inner proximal weight

  double tau_for(int i) const;
  void validate(int num_agents) const;
  bool operator==(const SurrogateSpec&) const = default;
};

class SubproblemError : public std::runtime_error {
 public:
  SubproblemError(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

Vec soft_threshold(const Vec& x, double beta);

// f~_i(z; x_i) and its gradient in z.
double surrogate_value(const SurrogateSpec& spec, const ProblemInstance& p, int i, const Vec& x_i,
                       const Vec& z);
Vec surrogate_gradient(const SurrogateSpec& spec, const ProblemInstance& p, int i, const Vec& x_i,
                       const Vec& z);
// Upper bound on the Lipschitz constant of surrogate_gradient in z.
double surrogate_lipschitz(const SurrogateSpec& spec, const ProblemInstance& p, int i);

double subproblem_objective(const SurrogateSpec& spec, const ProblemInstance& p, int i,
                            const Vec& x_i, const Vec& y_i, const Vec& z);

// Closed form whenever the surrogate is a linearization, the generic solver otherwise.
Vec solve_subproblem(const SurrogateSpec& spec, const ProblemInstance& p, int i, const Vec& x_i,
                     const Vec& y_i);
// Always goes through inner_proximal_solver; used to cross-check the closed forms.
Vec solve_subproblem_generic(const SurrogateSpec& spec, const ProblemInstance& p, int i,
                             const Vec& x_i, const Vec& y_i, const Vec* warm_start = nullptr);

struct InnerOptions {
  double tol = 1e-8;
  int max_iters = 100000;
  double gamma0 = 0.5;
  double mu = 0.01;
  double proximal = 2.0;  // weight of the proximal term in each inner step
};

struct InnerResult {
  Vec z;
  int iterations = 0;
  double residual = 0.0;
};

// Minimizes h(z) + gplus_weight ||z||_1 over the set, with h strongly convex (modulus tau) and
// smooth_grad its gradient. Stops when ||z - prox(z - grad h(z))||_inf <= tol.
InnerResult inner_proximal_solver(const std::function<Vec(const Vec&)>& smooth_grad,
                                  double strong_convexity_tau, double gplus_weight,
                                  const ConstraintSet& constraint, const Vec& z0,
                                  const InnerOptions& opts);

}  // namespace sonata
