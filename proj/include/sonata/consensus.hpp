#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "sonata/graph.hpp"

namespace sonata {

// Agent i's copies live in column i of x and y.
struct ConsensusState {
  Mat x;
  Vec phi;
  Mat y;

  int agents() const { return static_cast<int>(x.cols()); }
  int dim() const { return static_cast<int>(x.rows()); }
};

ConsensusState make_state(const Mat& x0);  // phi = 1, y = 0

// phi' = A phi and x'_i = (1/phi'_i) sum_j a_ij phi_j x_j + delta_i. y is carried over untouched.
ConsensusState push_sum_step(const ConsensusState& s, const WeightMatrix& A, const Mat& delta);

// Condensed mixing of arbitrary per-agent columns: returns (A (v .* phi)) ./ phi_new.
Mat condensed_mix(const Mat& A, const Mat& v, const Vec& phi_old, const Vec& phi_new);

Mat effective_row_stochastic(const Mat& A, const Vec& phi_old, const Vec& phi_new);

Vec weighted_average(const Mat& v, const Vec& phi);
double disagreement(const Mat& v, const Vec& phi);  // ||v - 1 (x) v_phi||
double consensus_error(const ConsensusState& s);

using SignalFn = std::function<Mat(std::uint64_t n)>;
// Dynamic average tracking through push-sum with delta_i = (u_i^{n+1} - u_i^n)/phi_i^{n+1}.
// Entry n of the result is ||x^n - 1 (x) mean(u^n)||.
std::vector<double> track_average(const SignalFn& signal, const GraphSequence& seq, int n_iters);

struct NetworkConstants {
  int I = 0;
  int B = 1;
  double kappa = 0.0;
  bool doubly_stochastic = false;
  double phi_lb = 1.0;
  double phi_ub = 1.0;
  double kappa_tilde = 0.0;
  // c0 overflows double for moderate I; log_c0 stays finite.
  double c0 = 0.0;
  double log_c0 = 0.0;
  double rho = 0.0;
  double log_rho = 0.0;
  // +infinity when rho rounds to 1 and no finite horizon can be certified.
  double B_bar = 0.0;
  double rho_Bbar = 1.0;
  double c = 1.0;

  bool b_bar_finite() const;
  // Decay envelope lambda^t (min{sqrt(2) I, 2 c0 I rho^floor(t/((I-1)B))}).
  double lambda(std::uint64_t t) const;
};

NetworkConstants network_constants(int I, int B, double kappa, bool doubly_stochastic);

}  // namespace sonata
