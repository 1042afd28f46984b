#pragma once

#include <optional>

#include "sonata/surrogates.hpp"

namespace sonata {

struct MeritReport {
  double J = 0.0;
  double D = 0.0;
  double M = 0.0;
  double J_inf = 0.0;
  double D_inf = 0.0;
  std::optional<double> NMSE;
};

// Residual x_bar - argmin_K {(grad F - grad G^-)^T (z - x_bar) + ||z - x_bar||^2 / 2 + G^+(z)}.
Vec stationarity_residual(const ProblemInstance& p, const Vec& x_bar);
double merit_J(const ProblemInstance& p, const Vec& x_bar);
double merit_J_inf(const ProblemInstance& p, const Vec& x_bar);

struct Disagreement {
  double euclidean = 0.0;
  double inf = 0.0;
};
Disagreement merit_D(const Mat& x);  // deviation from the uniform average

double nmse(const Mat& x, const Vec& x_star, bool sign_align = false);

MeritReport merit_report(const ProblemInstance& p, const Mat& x);

// Exact-gradient counterpart of the local subproblem at z.
Vec best_response_oracle(const ProblemInstance& p, const SurrogateSpec& spec, int i, const Vec& z);

}  // namespace sonata
