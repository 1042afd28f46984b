#include "sonata/problems.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

namespace sonata {

double max_eigenvalue_sym(const Mat& S) {
  if (S.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Mat> es(S, Eigen::EigenvaluesOnly);
  return std::max(0.0, es.eigenvalues().maxCoeff());
}

namespace {

// Dense eigenvalues are cheap at these sizes and never underestimate like truncated power
// iteration can. The smaller Gram matrix has the same nonzero spectrum.
double gram_norm(const Mat& A) {
  if (A.rows() < A.cols()) return max_eigenvalue_sym(A * A.transpose());
  return max_eigenvalue_sym(A.transpose() * A);
}

double sgn(double t) { return (t > 0.0) - (t < 0.0); }

}  // namespace

LeastSquaresCost::LeastSquaresCost(Mat A, Vec b) : A_(std::move(A)), b_(std::move(b)) {
  if (A_.rows() != b_.size()) throw std::invalid_argument("least squares: A and b disagree");
  gram_ = A_.transpose() * A_;
  atb_ = A_.transpose() * b_;
  L_ = 2.0 * gram_norm(A_);
}

double LeastSquaresCost::value(const Vec& x) const { return (b_ - A_ * x).squaredNorm(); }

Vec LeastSquaresCost::gradient(const Vec& x) const { return 2.0 * (gram_ * x - atb_); }

NegativeQuadraticCost::NegativeQuadraticCost(Mat D) : D_(std::move(D)) {
  gram_ = D_.transpose() * D_;
  L_ = 2.0 * gram_norm(D_);
}

double NegativeQuadraticCost::value(const Vec& x) const { return -(D_ * x).squaredNorm(); }

Vec NegativeQuadraticCost::gradient(const Vec& x) const { return -2.0 * (gram_ * x); }

QuadraticCost::QuadraticCost(Mat P, Vec q) : P_(std::move(P)), q_(std::move(q)) {
  if (P_.rows() != q_.size() || P_.cols() != q_.size())
    throw std::invalid_argument("quadratic: P and q disagree");
  L_ = max_eigenvalue_sym(0.5 * (P_ + P_.transpose()));
}

double QuadraticCost::value(const Vec& x) const { return 0.5 * x.dot(P_ * x) + q_.dot(x); }

Vec QuadraticCost::gradient(const Vec& x) const { return P_ * x + q_; }

FunctionCost::FunctionCost(int dim, std::function<double(const Vec&)> f,
                           std::function<Vec(const Vec&)> g, double lipschitz, bool convex)
    : dim_(dim), f_(std::move(f)), g_(std::move(g)), L_(lipschitz), convex_(convex) {}

std::string to_string(RegKind k) {
  switch (k) {
    case RegKind::None: return "none";
    case RegKind::L1: return "l1";
    case RegKind::Exp: return "exp";
    case RegKind::LpPlus: return "lp_plus";
    case RegKind::LpMinus: return "lp_minus";
    case RegKind::SCAD: return "scad";
    case RegKind::Log: return "log";
  }
  return "?";
}

RegKind reg_kind_from_string(const std::string& s) {
  for (auto k : {RegKind::None, RegKind::L1, RegKind::Exp, RegKind::LpPlus, RegKind::LpMinus,
                 RegKind::SCAD, RegKind::Log})
    if (to_string(k) == s) return k;
  throw std::invalid_argument("unknown regularizer '" + s + "'");
}

void Regularizer::validate() const {
  if (!(lambda >= 0.0)) throw std::invalid_argument("regularizer: lambda must be nonnegative");
  switch (kind) {
    case RegKind::None:
    case RegKind::L1:
      return;
    case RegKind::LpPlus:
      if (!(eps > 0.0)) throw std::invalid_argument("lp_plus: eps must be positive");
      if (!(theta > 1.0)) throw std::invalid_argument("lp_plus: theta must exceed 1 so 1/theta < 1");
      return;
    case RegKind::LpMinus:
      if (!(p < 0.0)) throw std::invalid_argument("lp_minus: p must be negative");
      break;
    case RegKind::SCAD:
      if (!(scad_a > 1.0)) throw std::invalid_argument("scad: a must exceed 1");
      break;
    default:
      break;
  }
  if (!(theta > 0.0)) throw std::invalid_argument("regularizer: theta must be positive");
}

double Regularizer::eta() const {
  switch (kind) {
    case RegKind::None: return 0.0;
    case RegKind::L1: return 1.0;
    case RegKind::Exp: return theta;
    case RegKind::LpPlus: return std::pow(eps, 1.0 / theta - 1.0) / theta;
    case RegKind::LpMinus: return -p * theta;
    case RegKind::SCAD: return 2.0 * theta / (scad_a + 1.0);
    case RegKind::Log: return theta / std::log1p(theta);
  }
  return 0.0;
}

double Regularizer::g(double t) const {
  const double a = std::abs(t);
  switch (kind) {
    case RegKind::None: return 0.0;
    case RegKind::L1: return a;
    case RegKind::Exp: return -std::expm1(-theta * a);
    case RegKind::LpPlus: return std::pow(a + eps, 1.0 / theta);
    case RegKind::LpMinus: return -std::expm1(p * std::log1p(theta * a));
    case RegKind::SCAD:
      if (a <= 1.0 / theta) return 2.0 * theta * a / (scad_a + 1.0);
      if (a <= scad_a / theta)
        return (-theta * theta * a * a + 2.0 * scad_a * theta * a - 1.0) / (scad_a * scad_a - 1.0);
      return 1.0;
    case RegKind::Log: return std::log1p(theta * a) / std::log1p(theta);
  }
  return 0.0;
}

double Regularizer::gminus(double t) const {
  const double a = std::abs(t);
  const double e = eta();
  switch (kind) {
    case RegKind::None:
    case RegKind::L1:
      return 0.0;
    case RegKind::Exp: return theta * a + std::expm1(-theta * a);
    case RegKind::LpPlus: return e * a - std::pow(a + eps, 1.0 / theta);
    case RegKind::LpMinus: return e * a + std::expm1(p * std::log1p(theta * a));
    case RegKind::SCAD: {
      const double a2 = scad_a * scad_a - 1.0;
      if (a <= 1.0 / theta) return 0.0;
      if (a <= scad_a / theta) {
        const double u = theta * a - 1.0;
        return u * u / a2;
      }
      return e * a - 1.0;
    }
    case RegKind::Log: return e * a - std::log1p(theta * a) / std::log1p(theta);
  }
  return 0.0;
}

double Regularizer::dgminus(double t) const {
  const double a = std::abs(t);
  const double s = sgn(t);
  switch (kind) {
    case RegKind::None:
    case RegKind::L1:
      return 0.0;
    case RegKind::Exp: return -s * theta * std::expm1(-theta * a);
    case RegKind::LpPlus:
      return s / theta * (std::pow(eps, 1.0 / theta - 1.0) - std::pow(a + eps, 1.0 / theta - 1.0));
    case RegKind::LpMinus: return s * p * theta * std::expm1((p - 1.0) * std::log1p(theta * a));
    case RegKind::SCAD:
      if (a <= 1.0 / theta) return 0.0;
      if (a <= scad_a / theta) return s * 2.0 * theta * (theta * a - 1.0) / (scad_a * scad_a - 1.0);
      return s * 2.0 * theta / (scad_a + 1.0);
    case RegKind::Log: return s * theta * theta * a / (std::log1p(theta) * (1.0 + theta * a));
  }
  return 0.0;
}

double Regularizer::value(const Vec& x) const {
  if (kind == RegKind::None || lambda == 0.0) return 0.0;
  double sum = 0.0;
  for (Eigen::Index k = 0; k < x.size(); ++k) sum += g(x[k]);
  return lambda * sum;
}

double Regularizer::gplus(const Vec& x) const { return lambda * eta() * x.lpNorm<1>(); }

double Regularizer::gminus(const Vec& x) const {
  double sum = 0.0;
  for (Eigen::Index k = 0; k < x.size(); ++k) sum += gminus(x[k]);
  return lambda * sum;
}

Vec Regularizer::grad_gminus(const Vec& x) const {
  Vec out(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) out[k] = lambda * dgminus(x[k]);
  return out;
}

double Regularizer::lipschitz_grad_gminus() const {
  double second = 0.0;  // sup of |d^2 g^- / dt^2|, attained at the origin or on the SCAD ramp
  switch (kind) {
    case RegKind::None:
    case RegKind::L1:
      break;
    case RegKind::Exp: second = theta * theta; break;
    case RegKind::LpPlus:
      second = (1.0 / theta) * (1.0 - 1.0 / theta) * std::pow(eps, 1.0 / theta - 2.0);
      break;
    case RegKind::LpMinus: second = theta * theta * p * (p - 1.0); break;
    case RegKind::SCAD: second = 2.0 * theta * theta / (scad_a * scad_a - 1.0); break;
    case RegKind::Log: second = theta * theta / std::log1p(theta); break;
  }
  return lambda * second;
}

double reg_value(const Regularizer& r, const Vec& x) { return r.value(x); }

DcParts reg_dc_parts(const Regularizer& r, const Vec& x) {
  return {r.gplus(x), r.gminus(x), r.grad_gminus(x)};
}

Vec ConstraintSet::project(const Vec& x) const {
  switch (kind) {
    case ConstraintKind::FullSpace: return x;
    case ConstraintKind::Ball: {
      const double n = x.norm();
      return n <= radius ? x : Vec(x * (radius / n));
    }
    case ConstraintKind::Box: return x.cwiseMax(lo).cwiseMin(hi);
  }
  return x;
}

bool ConstraintSet::contains(const Vec& x, double tol) const {
  switch (kind) {
    case ConstraintKind::FullSpace: return true;
    case ConstraintKind::Ball: return x.norm() <= radius * (1.0 + tol) + tol;
    case ConstraintKind::Box:
      return x.size() == 0 || (x.minCoeff() >= lo - tol && x.maxCoeff() <= hi + tol);
  }
  return false;
}

Vec ConstraintSet::prox_l1(const Vec& v, double beta) const {
  const Vec shrunk = (v.array().abs() - beta).max(0.0) * v.array().sign();
  return project(shrunk);
}

Vec project(const ConstraintSet& set, const Vec& x) { return set.project(x); }

double ProblemInstance::F(const Vec& x) const {
  double s = 0.0;
  for (const auto& c : costs) s += c->value(x);
  return s;
}

Vec ProblemInstance::grad_F(const Vec& x) const {
  Vec g = Vec::Zero(x.size());
  for (const auto& c : costs) g += c->gradient(x);
  return g;
}

double ProblemInstance::L_sum() const {
  double s = 0.0;
  for (const auto& c : costs) s += c->lipschitz();
  return s;
}

double ProblemInstance::L_max() const {
  double s = 0.0;
  for (const auto& c : costs) s = std::max(s, c->lipschitz());
  return s;
}

void ProblemInstance::validate() const {
  if (costs.empty()) throw std::invalid_argument("problem has no agents");
  const int m = dim();
  for (const auto& c : costs)
    if (!c || c->dim() != m) throw std::invalid_argument("local costs disagree on dimension");
  reg.validate();
  if (ground_truth && ground_truth->size() != m)
    throw std::invalid_argument("ground truth has the wrong dimension");
  if (init == InitRule::Given && start.size() != m)
    throw std::invalid_argument("start point has the wrong dimension");
}

Mat ProblemInstance::initial_point(std::uint64_t seed) const {
  const int m = dim(), I = agents();
  switch (init) {
    case InitRule::Zero: return Mat::Zero(m, I);
    case InitRule::Given: return start.replicate(1, I);
    case InitRule::RandomNormalProjected: {
      std::mt19937_64 rng(seed ^ 0x5ca1ab1eULL);
      std::normal_distribution<double> nd;
      Mat x(m, I);
      for (int i = 0; i < I; ++i) {
        Vec v(m);
        for (int k = 0; k < m; ++k) v[k] = nd(rng);
        x.col(i) = constraint.project(v);
      }
      return x;
    }
  }
  return Mat::Zero(m, I);
}

ProblemInstance make_sparse_regression(int I, int m, int rows_per_agent, double noise_sigma,
                                       double sparsity, std::uint64_t seed, const Regularizer& reg) {
  if (I < 1 || m < 1 || rows_per_agent < 1) throw std::invalid_argument("sizes must be positive");
  if (!(sparsity >= 0.0 && sparsity <= 1.0)) throw std::invalid_argument("sparsity must be in [0,1]");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;

  Vec x_star(m);
  for (int k = 0; k < m; ++k) x_star[k] = nd(rng);
  const auto zeros = static_cast<int>(std::lround(sparsity * m));
  std::vector<int> order(m);
  for (int k = 0; k < m; ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return std::abs(x_star[a]) < std::abs(x_star[b]); });
  for (int k = 0; k < zeros; ++k) x_star[order[k]] = 0.0;

  ProblemInstance p;
  for (int i = 0; i < I; ++i) {
    Mat A(rows_per_agent, m);
    for (int r = 0; r < rows_per_agent; ++r) {
      for (int k = 0; k < m; ++k) A(r, k) = nd(rng);
      A.row(r).normalize();
    }
    Vec b = A * x_star;
    for (int r = 0; r < rows_per_agent; ++r) b[r] += noise_sigma * nd(rng);
    p.costs.push_back(std::make_shared<LeastSquaresCost>(std::move(A), std::move(b)));
  }
  p.reg = reg;
  p.constraint = ConstraintSet::full();
  p.ground_truth = x_star;
  p.init = InitRule::Zero;
  p.validate();
  return p;
}

Mat load_csv_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open data file: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      std::size_t pos = 0;
      double v = 0.0;
      try {
        v = std::stod(cell, &pos);
      } catch (const std::logic_error&) {
        throw DataError(path + ":" + std::to_string(lineno) + ": non-numeric value '" + cell + "'");
      }
      if (cell.find_first_not_of(" \t\r", pos) != std::string::npos)
        throw DataError(path + ":" + std::to_string(lineno) + ": non-numeric value '" + cell + "'");
      row.push_back(v);
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw DataError(path + ":" + std::to_string(lineno) + ": ragged row");
    rows.push_back(std::move(row));
  }
  if (rows.empty() || rows.front().empty()) throw DataError("data file is empty: " + path);
  Mat M(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) M(r, c) = rows[r][c];
  return M;
}

namespace {

Vec leading_eigenvector(const Mat& S) {
  Eigen::SelfAdjointEigenSolver<Mat> es(S);
  Vec v = es.eigenvectors().col(S.rows() - 1);
  Eigen::Index k = 0;
  v.cwiseAbs().maxCoeff(&k);
  if (v[k] < 0.0) v = -v;
  return v.normalized();
}

ProblemInstance pca_from_blocks(std::vector<Mat> blocks) {
  ProblemInstance p;
  const Eigen::Index m = blocks.front().cols();
  Mat S = Mat::Zero(m, m);
  for (auto& D : blocks) {
    S += D.transpose() * D;
    p.costs.push_back(std::make_shared<NegativeQuadraticCost>(std::move(D)));
  }
  p.reg = Regularizer{};
  p.constraint = ConstraintSet::ball(1.0);
  p.ground_truth = leading_eigenvector(S);
  p.sign_invariant_truth = true;
  p.init = InitRule::RandomNormalProjected;
  p.validate();
  return p;
}

}  // namespace

ProblemInstance make_distributed_pca(int I, int rows_per_agent, int m, std::uint64_t seed,
                                     PcaMode mode, const std::string& path,
                                     std::optional<std::uint64_t> covariance_seed) {
  if (I < 1) throw std::invalid_argument("sizes must be positive");
  std::vector<Mat> blocks;
  if (mode == PcaMode::FromFile) {
    Mat data = load_csv_matrix(path);
    const Eigen::Index d = data.rows();
    if (d < I) throw DataError("data file has fewer samples than agents");
    data.rowwise() -= data.colwise().mean();
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(d));
    for (Eigen::Index r = 0; r < d; ++r) perm[r] = r;
    std::mt19937_64 shuffle_rng(seed);
    std::shuffle(perm.begin(), perm.end(), shuffle_rng);
    const Mat shuffled = data(perm, Eigen::all);
    const Eigen::Index share = d / I;
    for (int i = 0; i < I; ++i) {
      const Eigen::Index start = i * share;
      const Eigen::Index count = (i + 1 < I) ? share : d - start;
      blocks.push_back(shuffled.middleRows(start, count));
    }
    return pca_from_blocks(std::move(blocks));
  }
  if (rows_per_agent < 1 || m < 1) throw std::invalid_argument("sizes must be positive");
  std::mt19937_64 cov_rng(covariance_seed.value_or(seed));
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  Mat G(m, m);
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < m; ++c) G(r, c) = nd(cov_rng);
  const Mat U = Eigen::HouseholderQR<Mat>(G).householderQ();
  Vec sqrt_lambda(m);
  for (int k = 0; k < m; ++k) sqrt_lambda[k] = std::sqrt(ud(cov_rng));
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  // rows ~ N(0, U diag(lambda) U^T)
  const Mat factor = U * sqrt_lambda.asDiagonal();
  for (int i = 0; i < I; ++i) {
    Mat Z(rows_per_agent, m);
    for (int r = 0; r < rows_per_agent; ++r)
      for (int c = 0; c < m; ++c) Z(r, c) = nd(rng);
    blocks.push_back(Z * factor.transpose());
  }
  return pca_from_blocks(std::move(blocks));
}

ProblemInstance make_diagonal_quadratic(int I, const Vec& curvature) {
  if (I < 1 || curvature.size() == 0) throw std::invalid_argument("sizes must be positive");
  if ((curvature.array() <= 0.0).any()) throw std::invalid_argument("curvature must be positive");
  const double total = I * (I + 1) / 2.0;
  ProblemInstance p;
  for (int i = 0; i < I; ++i) {
    const double share = (i + 1) / total;
    const double shift = i - (I - 1) / 2.0;
    Mat P = (share * curvature).asDiagonal();
    Vec q = shift * curvature.cwiseSqrt();
    p.costs.push_back(std::make_shared<QuadraticCost>(std::move(P), std::move(q)));
  }
  p.reg = Regularizer{};
  p.constraint = ConstraintSet::full();
  p.ground_truth = std::nullopt;
  p.init = InitRule::Given;
  p.start = curvature.cwiseSqrt().cwiseInverse();
  p.validate();
  return p;
}

}  // namespace sonata
