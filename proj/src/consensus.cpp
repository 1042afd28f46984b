#include "sonata/consensus.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace sonata {

namespace {

double log_add_exp(double a, double b) {
  const double hi = std::max(a, b), lo = std::min(a, b);
  return hi + std::log1p(std::exp(lo - hi));
}

}  // namespace

ConsensusState make_state(const Mat& x0) {
  ConsensusState s;
  s.x = x0;
  s.phi = Vec::Ones(x0.cols());
  s.y = Mat::Zero(x0.rows(), x0.cols());
  return s;
}

Mat condensed_mix(const Mat& A, const Mat& v, const Vec& phi_old, const Vec& phi_new) {
  // Columns are agents, so the row-wise mixing of the stacked vector is a right multiply.
  Mat out = (v * phi_old.asDiagonal()) * A.transpose();
  return out * phi_new.cwiseInverse().asDiagonal();
}

ConsensusState push_sum_step(const ConsensusState& s, const WeightMatrix& A, const Mat& delta) {
  const int I = s.agents();
  if (A.entries.rows() != I || A.entries.cols() != I)
    throw std::invalid_argument("weight matrix size does not match the number of agents");
  if (delta.rows() != s.x.rows() || delta.cols() != I)
    throw std::invalid_argument("perturbation shape does not match the state");
  ConsensusState out;
  out.phi = A.entries * s.phi;
  out.x = condensed_mix(A.entries, s.x, s.phi, out.phi) + delta;
  out.y = s.y;
  return out;
}

Mat effective_row_stochastic(const Mat& A, const Vec& phi_old, const Vec& phi_new) {
  return phi_new.cwiseInverse().asDiagonal() * A * phi_old.asDiagonal();
}

Vec weighted_average(const Mat& v, const Vec& phi) { return v * phi / static_cast<double>(v.cols()); }

double disagreement(const Mat& v, const Vec& phi) {
  const Vec avg = weighted_average(v, phi);
  return (v.colwise() - avg).norm();
}

double consensus_error(const ConsensusState& s) { return disagreement(s.x, s.phi); }

std::vector<double> track_average(const SignalFn& signal, const GraphSequence& seq, int n_iters) {
  Mat u = signal(0);
  ConsensusState s = make_state(u);
  std::vector<double> err;
  err.reserve(static_cast<std::size_t>(n_iters) + 1);
  err.push_back((s.x.colwise() - u.rowwise().mean()).norm());
  for (int n = 0; n < n_iters; ++n) {
    const WeightMatrix A = build_push_sum_weights(generate_snapshot(seq, n));
    const Mat u_next = signal(n + 1);
    const Vec phi_next = A.entries * s.phi;
    const Mat delta = (u_next - u) * phi_next.cwiseInverse().asDiagonal();
    s = push_sum_step(s, A, delta);
    u = u_next;
    err.push_back((s.x.colwise() - u.rowwise().mean()).norm());
  }
  return err;
}

bool NetworkConstants::b_bar_finite() const { return std::isfinite(B_bar); }

double NetworkConstants::lambda(std::uint64_t t) const {
  if (doubly_stochastic) {
    const double k = std::floor(static_cast<double>(t) / B);
    return std::min(1.0, std::pow(rho, k));
  }
  const double period = static_cast<double>(I - 1) * B;
  const double k = std::floor(static_cast<double>(t) / period);
  const double log_env = std::log(2.0 * I) + log_c0 + k * log_rho;
  return std::min(std::sqrt(2.0) * I, std::exp(log_env));
}

NetworkConstants network_constants(int I, int B, double kappa, bool doubly_stochastic) {
  if (!(kappa > 0.0 && kappa < 1.0)) throw std::invalid_argument("kappa must lie in (0,1)");
  if (I < 2) throw std::invalid_argument("network constants need at least two agents");
  if (B < 1) throw std::invalid_argument("window B must be positive");
  NetworkConstants k;
  k.I = I;
  k.B = B;
  k.kappa = kappa;
  k.doubly_stochastic = doubly_stochastic;
  if (doubly_stochastic) {
    k.phi_lb = k.phi_ub = 1.0;
    k.rho = std::sqrt(1.0 - kappa / (2.0 * I * I));
    k.log_rho = std::log(k.rho);
    k.c0 = 1.0 / (2.0 * I);
    k.log_c0 = std::log(k.c0);
    k.kappa_tilde = kappa;
    k.B_bar = B;
    k.rho_Bbar = k.rho;
    k.c = 1.0;
    return k;
  }
  const double period = static_cast<double>(I - 1) * B;
  const double log_kappa = std::log(kappa);
  k.phi_lb = std::exp(2.0 * period * log_kappa);
  k.phi_ub = I - k.phi_lb;
  const double log_kt = (2.0 * period + 1.0) * log_kappa - std::log(static_cast<double>(I));
  k.kappa_tilde = std::exp(log_kt);
  k.log_c0 = std::log(2.0) + log_add_exp(0.0, -period * log_kt);
  k.c0 = std::exp(k.log_c0);
  k.log_rho = std::log1p(-std::exp(period * log_kt));
  k.rho = std::exp(k.log_rho);
  k.c = I * std::sqrt(2.0 * I);
  const double log_lead = std::log(2.0 * I) + k.log_c0;
  if (k.log_rho == 0.0) {
    k.B_bar = std::numeric_limits<double>::infinity();
    k.rho_Bbar = 1.0;
  } else {
    const double blocks = std::floor(log_lead / -k.log_rho) + 1.0;
    k.B_bar = blocks * period;
    k.rho_Bbar = std::exp(log_lead + blocks * k.log_rho);
  }
  return k;
}

}  // namespace sonata
