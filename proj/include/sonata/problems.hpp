#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sonata/graph.hpp"

namespace sonata {

class SmoothLocalCost {
 public:
  virtual ~SmoothLocalCost() = default;
  virtual int dim() const = 0;
  virtual double value(const Vec& x) const = 0;
  virtual Vec gradient(const Vec& x) const = 0;
  virtual double lipschitz() const = 0;
  // Partial linearization keeps a convex cost whole and linearizes anything else.
  virtual bool is_convex() const { return false; }
};

// ||b - A x||^2
class LeastSquaresCost final : public SmoothLocalCost {
 public:
  LeastSquaresCost(Mat A, Vec b);
  int dim() const override { return static_cast<int>(A_.cols()); }
  double value(const Vec& x) const override;
  Vec gradient(const Vec& x) const override;
  double lipschitz() const override { return L_; }
  bool is_convex() const override { return true; }
  const Mat& A() const { return A_; }
  const Vec& b() const { return b_; }

 private:
  Mat A_;
  Vec b_;
  Mat gram_;  // A^T A
  Vec atb_;
  double L_;
};

// -||D x||^2
class NegativeQuadraticCost final : public SmoothLocalCost {
 public:
  explicit NegativeQuadraticCost(Mat D);
  int dim() const override { return static_cast<int>(D_.cols()); }
  double value(const Vec& x) const override;
  Vec gradient(const Vec& x) const override;
  double lipschitz() const override { return L_; }
  const Mat& D() const { return D_; }

 private:
  Mat D_;
  Mat gram_;
  double L_;
};

// (1/2) x^T P x + q^T x with P symmetric positive semidefinite.
class QuadraticCost final : public SmoothLocalCost {
 public:
  QuadraticCost(Mat P, Vec q);
  int dim() const override { return static_cast<int>(q_.size()); }
  double value(const Vec& x) const override;
  Vec gradient(const Vec& x) const override;
  double lipschitz() const override { return L_; }
  bool is_convex() const override { return true; }

 private:
  Mat P_;
  Vec q_;
  double L_;
};

// Wraps callables; used for ad hoc nonconvex costs in tests.
class FunctionCost final : public SmoothLocalCost {
 public:
  FunctionCost(int dim, std::function<double(const Vec&)> f, std::function<Vec(const Vec&)> g,
               double lipschitz, bool convex = false);
  int dim() const override { return dim_; }
  double value(const Vec& x) const override { return f_(x); }
  Vec gradient(const Vec& x) const override { return g_(x); }
  double lipschitz() const override { return L_; }
  bool is_convex() const override { return convex_; }

 private:
  int dim_;
  std::function<double(const Vec&)> f_;
  std::function<Vec(const Vec&)> g_;
  double L_;
  bool convex_;
};

enum class RegKind { None, L1, Exp, LpPlus, LpMinus, SCAD, Log };

std::string to_string(RegKind k);
RegKind reg_kind_from_string(const std::string& s);

struct Regularizer {
  RegKind kind = RegKind::None;
  double theta = 2.0;
  double scad_a = 3.7;
  double eps = 1e-4;  // LpPlus
  double p = -1.0;    // LpMinus exponent, must be negative
  double lambda = 0.0;

  void validate() const;  // throws std::invalid_argument
  double eta() const;     // eta(theta); 1 for L1, 0 for None
  // Scalar pieces without the lambda weight.
  double g(double t) const;
  double gminus(double t) const;  // eta |t| - g(t), from its own closed form
  double dgminus(double t) const;
  double value(const Vec& x) const;  // lambda * sum g(x_k)
  double gplus(const Vec& x) const;  // lambda * eta * ||x||_1
  double gminus(const Vec& x) const;
  Vec grad_gminus(const Vec& x) const;
  double lipschitz_grad_gminus() const;  // L_G, including lambda
  bool operator==(const Regularizer&) const = default;
};

struct DcParts {
  double gplus;
  double gminus;
  Vec grad_gminus;
};

double reg_value(const Regularizer& r, const Vec& x);
DcParts reg_dc_parts(const Regularizer& r, const Vec& x);

enum class ConstraintKind { FullSpace, Ball, Box };

struct ConstraintSet {
  ConstraintKind kind = ConstraintKind::FullSpace;
  double radius = 1.0;
  double lo = 0.0;
  double hi = 1.0;

  static ConstraintSet full() { return {}; }
  static ConstraintSet ball(double r) { return {ConstraintKind::Ball, r, 0.0, 1.0}; }
  static ConstraintSet box(double lo, double hi) { return {ConstraintKind::Box, 1.0, lo, hi}; }

  Vec project(const Vec& x) const;
  bool contains(const Vec& x, double tol = 1e-12) const;
  // Proximal map of beta ||.||_1 plus the indicator of the set: shrink, then project.
  Vec prox_l1(const Vec& v, double beta) const;
  bool operator==(const ConstraintSet&) const = default;
};

Vec project(const ConstraintSet& set, const Vec& x);

enum class InitRule { Zero, RandomNormalProjected, Given };

struct ProblemInstance {
  std::vector<std::shared_ptr<const SmoothLocalCost>> costs;
  Regularizer reg;
  ConstraintSet constraint;
  std::optional<Vec> ground_truth;
  bool sign_invariant_truth = false;  // eigenvector-type ground truth
  bool lower_bounded = true;
  InitRule init = InitRule::Zero;
  Vec start;  // used when init == Given, shared by every agent

  int agents() const { return static_cast<int>(costs.size()); }
  int dim() const { return costs.empty() ? 0 : costs.front()->dim(); }
  double F(const Vec& x) const;
  Vec grad_F(const Vec& x) const;
  double U(const Vec& x) const { return F(x) + reg.value(x); }
  double L_sum() const;
  double L_max() const;
  void validate() const;
  Mat initial_point(std::uint64_t seed) const;  // m x I
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

ProblemInstance make_sparse_regression(int I, int m, int rows_per_agent, double noise_sigma,
                                       double sparsity, std::uint64_t seed, const Regularizer& reg);

enum class PcaMode { Synthetic, FromFile };

// Synthetic mode draws the covariance from covariance_seed (defaults to seed) and the samples
// from seed. File mode permutes the samples with seed before splitting them across agents.
ProblemInstance make_distributed_pca(int I, int rows_per_agent, int m, std::uint64_t seed,
                                     PcaMode mode, const std::string& path = {},
                                     std::optional<std::uint64_t> covariance_seed = std::nullopt);

// Dense numeric CSV, one sample per row, no header.
Mat load_csv_matrix(const std::string& path);

// Smooth convex instance F(x) = (1/2) sum_k h_k x_k^2. Agents get unequal shares of the
// curvature plus linear terms that cancel in the sum; all start from x0_k = h_k^{-1/2}.
ProblemInstance make_diagonal_quadratic(int I, const Vec& curvature);

double max_eigenvalue_sym(const Mat& S);

}  // namespace sonata
