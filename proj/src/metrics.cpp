#include "sonata/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace sonata {

Vec stationarity_residual(const ProblemInstance& p, const Vec& x_bar) {
  // Unit proximal weight makes the inner argmin a single prox evaluation for every set here.
  const Vec step = x_bar - (p.grad_F(x_bar) - p.reg.grad_gminus(x_bar));
  return x_bar - p.constraint.prox_l1(step, p.reg.lambda * p.reg.eta());
}

double merit_J(const ProblemInstance& p, const Vec& x_bar) {
  return stationarity_residual(p, x_bar).norm();
}

double merit_J_inf(const ProblemInstance& p, const Vec& x_bar) {
  return stationarity_residual(p, x_bar).lpNorm<Eigen::Infinity>();
}

Disagreement merit_D(const Mat& x) {
  const Mat dev = x.colwise() - x.rowwise().mean();
  return {dev.norm(), dev.size() ? dev.lpNorm<Eigen::Infinity>() : 0.0};
}

double nmse(const Mat& x, const Vec& x_star, bool sign_align) {
  const double denom = static_cast<double>(x.cols()) * x_star.squaredNorm();
  if (!(denom > 0.0)) throw std::invalid_argument("NMSE needs a nonzero ground truth");
  const double plus = (x.colwise() - x_star).squaredNorm() / denom;
  if (!sign_align) return plus;
  const double minus = (x.colwise() + x_star).squaredNorm() / denom;
  return std::min(plus, minus);
}

MeritReport merit_report(const ProblemInstance& p, const Mat& x) {
  MeritReport r;
  const Vec x_bar = x.rowwise().mean();
  const Vec res = stationarity_residual(p, x_bar);
  r.J = res.norm();
  r.J_inf = res.lpNorm<Eigen::Infinity>();
  const Disagreement d = merit_D(x);
  r.D = d.euclidean;
  r.D_inf = d.inf;
  r.M = std::max(r.J * r.J, r.D * r.D);
  if (p.ground_truth) r.NMSE = nmse(x, *p.ground_truth, p.sign_invariant_truth);
  return r;
}

Vec best_response_oracle(const ProblemInstance& p, const SurrogateSpec& spec, int i, const Vec& z) {
  // With y_i = grad F(z) / I the tracked proxy I y_i - grad f_i(z) is the exact neighbor sum.
  const Vec y = p.grad_F(z) / static_cast<double>(p.agents());
  return solve_subproblem(spec, p, i, z, y);
}

}  // namespace sonata
