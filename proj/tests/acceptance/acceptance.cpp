// Acceptance checks, one PASS/FAIL line per criterion.
//
//   acceptance [--only 1,5,9] [--expect-fail 4,7]
//
// Without --expect-fail the exit status is nonzero when any criterion fails. With it, the exit
// status is zero exactly when the failing set equals the given list, so an unexpected pass is
// reported as loudly as a new failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sonata/harness.hpp"
#include "sonata/metrics.hpp"

using namespace sonata;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string strf(const char* fmt, ...) {
  va_list ap;
  va_start(ap, fmt);
  char buf[1024];
  std::vsnprintf(buf, sizeof buf, fmt, ap);
  va_end(ap);
  return buf;
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

Mat randn(int r, int c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Mat m(r, c);
  for (int j = 0; j < c; ++j)
    for (int i = 0; i < r; ++i) m(i, j) = nd(rng);
  return m;
}

Mat local_gradients(const ProblemInstance& p, const Mat& x) {
  Mat g(x.rows(), x.cols());
  for (int i = 0; i < p.agents(); ++i) g.col(i) = p.costs[i]->gradient(x.col(i));
  return g;
}

// Sparse regression at desk scale with the preset's data model.
ExperimentConfig desk_regression(int dim, int rows) {
  ExperimentConfig cfg = preset_config("sparse_regression_log");
  cfg.problem.agents = 10;
  cfg.problem.dim = dim;
  cfg.problem.rows_per_agent = rows;
  return cfg;
}

// ---------------------------------------------------------------------------------------------
// 1. push-sum invariants

Outcome push_sum_invariants() {
  Stopwatch clock;
  const int I = 10, m = 4, steps = 5000;
  double worst_sum = 0.0, worst_weighted = 0.0, min_phi = 1e300, max_phi = 0.0;
  bool bounds_ok = true;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    const GraphSequence seq{GraphModel::RingPlusRandom, seed, I, 1, {}};
    ConsensusState s = make_state(randn(m, I, rng));
    const Vec target = s.x * s.phi;
    for (int n = 0; n < steps; ++n) {
      const WeightMatrix A = build_push_sum_weights(generate_snapshot(seq, n));
      const NetworkConstants k = network_constants(I, 1, A.kappa, false);
      s = push_sum_step(s, A, Mat::Zero(m, I));
      worst_sum = std::max(worst_sum, std::abs(s.phi.sum() - I));
      worst_weighted = std::max(worst_weighted, (s.x * s.phi - target).lpNorm<Eigen::Infinity>());
      min_phi = std::min(min_phi, s.phi.minCoeff());
      max_phi = std::max(max_phi, s.phi.maxCoeff());
      bounds_ok = bounds_ok && s.phi.minCoeff() >= k.phi_lb && s.phi.maxCoeff() <= k.phi_ub;
    }
  }
  const double t = clock.seconds();
  const bool pass = worst_sum <= 1e-9 && worst_weighted <= 1e-9 && bounds_ok && t < 10.0;
  return {pass, strf("max |sum phi - I| %.2e, max weighted-sum drift %.2e, phi in [%.3g, %.3g] %s, %.2f s",
                     worst_sum, worst_weighted, min_phi, max_phi, bounds_ok ? "within bounds" : "OUT OF BOUNDS", t)};
}

// ---------------------------------------------------------------------------------------------
// 2. geometric consensus

Outcome geometric_consensus() {
  Stopwatch clock;
  const int I = 30, m = 5, steps = 2000;
  std::mt19937_64 rng(2);
  const GraphSequence seq{GraphModel::RingPlusRandom, 17, I, 1, {}};
  ConsensusState s = make_state(randn(m, I, rng));
  const double e0 = consensus_error(s);
  const double log_x0 = std::log(s.x.norm());
  const Vec avg0 = s.x * s.phi / static_cast<double>(I);
  const NetworkConstants k = network_constants(I, 1, 1.0 / 3.0, false);
  int hit = -1;
  bool majorized = true;
  double worst_ratio = 0.0;
  for (int n = 1; n <= steps; ++n) {
    const WeightMatrix A = build_push_sum_weights(generate_snapshot(seq, n - 1));
    if (A.kappa < 1.0 / 3.0 - 1e-15) majorized = false;  // constants assume kappa = 1/3
    s = push_sum_step(s, A, Mat::Zero(m, I));
    const double err = consensus_error(s);
    if (hit < 0 && err <= 1e-10) hit = n;
    // Error-decay envelope with zero perturbation, and the closed average-consensus bound.
    const double env = k.lambda(static_cast<std::uint64_t>(n)) * e0;
    const double dev = (s.x.colwise() - avg0).norm();
    const double log_env2 = std::log(2.0 * I) + k.log_c0 + std::floor(n / ((I - 1.0) * 1)) * k.log_rho + log_x0;
    if (err > env * (1 + 1e-12) || std::log(std::max(dev, 1e-300)) > log_env2 + 1e-12) majorized = false;
    worst_ratio = std::max(worst_ratio, err / env);
  }
  const double t = clock.seconds();
  const bool pass = hit > 0 && majorized && t < 5.0;
  return {pass, strf("error <= 1e-10 at iteration %d, max error/envelope %.2e, envelope %s, %.2f s", hit,
                     worst_ratio, majorized ? "holds" : "VIOLATED", t)};
}

// ---------------------------------------------------------------------------------------------
// 3. gradient tracking

Outcome gradient_tracking() {
  const int I = 10;
  const auto cfg = desk_regression(50, 6);
  const ProblemInstance p = build_problem(cfg, 0);
  const GraphSequence seq{GraphModel::RingPlusRandom, 5, I, 1, {}};
  std::mt19937_64 rng(3);
  const Mat frozen = randn(p.dim(), I, rng);
  const Mat g = local_gradients(p, frozen);
  const auto err = track_average([&](std::uint64_t) { return g; }, seq, 2000);
  int hit = -1;
  for (std::size_t n = 0; n < err.size(); ++n)
    if (err[n] <= 1e-10) {
      hit = static_cast<int>(n);
      break;
    }

  // Vanishing signal. On the random sequence the error decays like 1/n^2 but jitters from one graph to the
  // next, so monotonicity is checked on a fixed strongly connected digraph.
  const Mat v = randn(p.dim(), I, rng);
  const int N = 3000, burn_in = 300;
  auto signal = [&](std::uint64_t n) { return Mat(v / (n + 1.0)); };
  const auto varying = track_average(signal, seq, N);
  const GraphSequence fixed{GraphModel::StaticStronglyConnected, 5, I, 1, {}};
  const auto err2 = track_average(signal, fixed, N);
  int last_increase = 0;
  for (int n = 1; n <= N; ++n)
    if (err2[n] > err2[n - 1]) last_increase = n;
  const bool vanishes = err2[N] <= 1e-3 * err2[0] && varying[N] <= 1e-3 * varying[0];
  const bool pass = hit > 0 && last_increase < burn_in && vanishes;
  return {pass, strf("frozen x: error <= 1e-10 at iteration %d; v/(n+1) on a fixed digraph: last increase at n=%d "
                     "(burn-in %d), error %.2e -> %.2e; on the time-varying sequence %.2e -> %.2e",
                     hit, last_increase, burn_in, err2[0], err2[N], varying[0], varying[N])};
}

// ---------------------------------------------------------------------------------------------
// 4. regularizers

Outcome regularizers() {
  const RegKind kinds[] = {RegKind::Exp, RegKind::LpPlus, RegKind::LpMinus, RegKind::SCAD, RegKind::Log};
  std::mt19937_64 rng(4);
  std::normal_distribution<double> nd(0.0, 2.0);
  bool pass = true;
  std::string detail;
  for (RegKind kind : kinds) {
    Regularizer r;
    r.kind = kind;
    r.lambda = 1.0;
    double dc = 0.0, fd = 0.0;
    for (int t = 0; t < 1000; ++t) {
      double x = nd(rng);
      if (kind == RegKind::SCAD) {
        const double a = std::abs(x);
        if (std::abs(a - 1.0 / r.theta) < 1e-4 || std::abs(a - r.scad_a / r.theta) < 1e-4) x += 1e-3;
      }
      const Vec xv = Vec::Constant(1, x);
      const double gp = r.gplus(xv), gm = r.gminus(xv);
      dc = std::max(dc, std::abs(gp - gm - r.value(xv)) / std::max(1.0, std::abs(gp)));
      const double h = 1e-6;
      const double num = (r.gminus(x + h) - r.gminus(x - h)) / (2 * h);
      fd = std::max(fd, std::abs(num - r.dgminus(x)) / std::max(1.0, std::abs(r.dgminus(x))));
    }
    Regularizer lim = r;
    lim.theta = 1e6;
    const double g1 = lim.g(1.0), g0 = lim.g(0.0);
    const bool limit_ok = std::abs(g1 - 1.0) <= 1e-3 && std::abs(g0) <= 1e-12;
    const bool ok = dc <= 1e-12 && fd <= 1e-6 && limit_ok;
    pass = pass && ok;
    detail += strf("%s%s: dc %.1e fd %.1e g(1)=%.6f g(0)=%.6f%s", detail.empty() ? "" : "; ",
                   to_string(kind).c_str(), dc, fd, g1, g0, ok ? "" : " [fails]");
  }
  return {pass, detail};
}

// ---------------------------------------------------------------------------------------------
// 5. closed forms against the generic solver

Outcome subproblem_oracles() {
  std::mt19937_64 rng(5);
  struct Form {
    const char* name;
    std::function<ProblemInstance(std::uint64_t)> build;
    SurrogateSpec spec;
  };
  SurrogateSpec eq35;
  eq35.tau = {10.0};
  SurrogateSpec soft;
  soft.tau = {1.5};
  SurrogateSpec ball;
  ball.tau = {1.0};
  for (SurrogateSpec* s : {&eq35, &soft, &ball}) {
    s->kind = SurrogateKind::Linearization;
    s->inner_tolerance = 1e-13;
  }
  const std::vector<Form> forms = {
      {"tau=I, G=0", [](std::uint64_t seed) {
         auto cfg = desk_regression(50, 6);
         cfg.problem.reg.kind = RegKind::None;
         cfg.problem.reg.lambda = 0.0;
         return build_problem(cfg, static_cast<int>(seed));
       }, eq35},
      {"soft-threshold", [](std::uint64_t seed) { return build_problem(desk_regression(50, 6), static_cast<int>(seed)); },
       soft},
      {"ball projection", [](std::uint64_t seed) {
         return build_problem(preset_config("dpca_synthetic_desk"), static_cast<int>(seed));
       }, ball}};
  bool pass = true;
  std::string detail;
  for (const auto& f : forms) {
    double worst = 0.0;
    for (int inst = 0; inst < 200; ++inst) {
      const ProblemInstance p = f.build(static_cast<std::uint64_t>(inst / 10));
      const int i = inst % p.agents();
      const Vec x = p.constraint.project(randn(p.dim(), 1, rng).col(0));
      const Vec y = randn(p.dim(), 1, rng, 0.3).col(0);
      const Vec closed = solve_subproblem(f.spec, p, i, x, y);
      const Vec generic = solve_subproblem_generic(f.spec, p, i, x, y);
      worst = std::max(worst, (closed - generic).norm());
    }
    pass = pass && worst <= 1e-8;
    detail += strf("%s%s max gap %.1e", detail.empty() ? "" : "; ", f.name, worst);
  }
  return {pass, detail + " (200 instances each)"};
}

// ---------------------------------------------------------------------------------------------
// 6. special-case equivalences, each against an independent implementation

struct Iterates {
  std::vector<Mat> x;  // x^0 .. x^N
};

Iterates library_iterates(const ProblemInstance& p, const AlgorithmConfig& cfg, const GraphSequence& seq, int N) {
  RunOptions opts;
  opts.n_iters = static_cast<std::uint64_t>(N);
  opts.log_every = static_cast<std::uint64_t>(N);
  opts.keep_samples = true;
  const RunResult r = run(p, cfg, seq, opts, 0);
  Iterates out;
  for (const auto& s : r.samples) out.x.push_back(s.x);
  out.x.push_back(r.final_state.x);
  return out;
}

enum class Reference { NextAtc, DIGing, AddOpt };

Iterates reference_iterates(const ProblemInstance& p, Reference ref, const GraphSequence& seq, double alpha, int N) {
  const int I = p.agents();
  Mat x = p.initial_point(0);
  Mat g = local_gradients(p, x);
  Mat y = g;  // y~ for ADD-OPT, which starts at phi = 1
  Mat z = x;
  Vec phi = Vec::Ones(I);
  Iterates out{{x}};
  for (int n = 0; n < N; ++n) {
    const DigraphSnapshot snap = generate_snapshot(seq, n);
    Mat xn;
    if (ref == Reference::AddOpt) {
      const Mat A = build_push_sum_weights(snap).entries;
      z = z * A.transpose() - alpha * y;
      phi = A * phi;
      xn = z * phi.cwiseInverse().asDiagonal();
      const Mat gn = local_gradients(p, xn);
      y = y * A.transpose() + gn - g;
      g = gn;
    } else {
      const Mat W = build_metropolis_weights(snap).entries;
      xn = ref == Reference::NextAtc ? Mat((x - alpha * y) * W.transpose()) : Mat(x * W.transpose() - alpha * y);
      const Mat gn = local_gradients(p, xn);
      y = y * W.transpose() + gn - g;
      g = gn;
    }
    x = xn;
    out.x.push_back(x);
  }
  return out;
}

double max_gap(const Iterates& a, const Iterates& b) {
  if (a.x.size() != b.x.size()) return std::numeric_limits<double>::infinity();
  double worst = 0.0;
  for (std::size_t k = 0; k < a.x.size(); ++k) worst = std::max(worst, (a.x[k] - b.x[k]).lpNorm<Eigen::Infinity>());
  return worst;
}

// Time-varying undirected graphs: each ring-plus-random snapshot with every link made two-way.
GraphSequence undirected_sequence(int I, std::uint64_t seed, int N) {
  const GraphSequence base{GraphModel::RingPlusRandom, seed, I, 1, {}};
  GraphSequence seq{GraphModel::Custom, seed, I, 1, {}};
  for (int n = 0; n < N; ++n) {
    const DigraphSnapshot d = generate_snapshot(base, n);
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i < I; ++i)
      for (int j : d.out_neighbors(i))
        if (j != i) {
          edges.push_back({i, j});
          edges.push_back({j, i});
        }
    seq.custom.emplace_back(I, edges);
  }
  return seq;
}

Outcome special_cases() {
  const int I = 10, N = 100;
  const double alpha = 0.05;
  double gap_sonata = 0.0, gap_next = 0.0, gap_diging = 0.0, gap_addopt = 0.0;
  for (int seed = 0; seed < 5; ++seed) {
    auto cfg = desk_regression(20, 6);
    cfg.problem.reg.kind = RegKind::None;
    cfg.problem.reg.lambda = 0.0;
    const ProblemInstance p = build_problem(cfg, seed);
    const GraphSequence undirected = undirected_sequence(I, static_cast<std::uint64_t>(seed), N);
    const GraphSequence directed{GraphModel::StaticStronglyConnected, static_cast<std::uint64_t>(seed), I, 1, {}};

    auto with_step = [&](Preset pr) {
      AlgorithmConfig c = apply_preset(pr, I);
      c.schedule = StepSizeSchedule::constant(alpha);
      return c;
    };
    // SONATA-L fed doubly stochastic weights.
    AlgorithmConfig sonata_l = with_step(Preset::SonataL);
    sonata_l.weights = WeightRule::Metropolis;

    const Iterates next_ref = reference_iterates(p, Reference::NextAtc, undirected, alpha, N);
    gap_sonata = std::max(gap_sonata, max_gap(library_iterates(p, sonata_l, undirected, N), next_ref));
    gap_next = std::max(gap_next, max_gap(library_iterates(p, with_step(Preset::NextL), undirected, N), next_ref));
    gap_diging = std::max(gap_diging, max_gap(library_iterates(p, with_step(Preset::DIGing), undirected, N),
                                              reference_iterates(p, Reference::DIGing, undirected, alpha, N)));
    gap_addopt = std::max(gap_addopt, max_gap(library_iterates(p, with_step(Preset::AddOpt), directed, N),
                                              reference_iterates(p, Reference::AddOpt, directed, alpha, N)));
  }
  const bool pass = std::max({gap_sonata, gap_next, gap_diging, gap_addopt}) <= 1e-12;
  return {pass, strf("max |x_lib - x_ref| over 100 iterations x 5 seeds: SONATA-L(doubly stochastic) vs NEXT-L %.1e, "
                     "NEXT-L preset %.1e, DIGing vs CAA-NEXT-L %.1e, ADD-OPT vs CAA-SONATA-L %.1e",
                     gap_sonata, gap_next, gap_diging, gap_addopt)};
}

// ---------------------------------------------------------------------------------------------
// 7. stationarity at desk scale, with the best-response consistency bound along the way

struct DeskRun {
  std::string label;
  bool finished = false;  // false when the iterates blew up or the inner solver gave up
  std::string failure;
  int hit = -1;  // first logged iteration with M < 1e-8
  double final_M = std::numeric_limits<double>::quiet_NaN();
  int bound_checks = 0;
  int bound_violations = 0;
  double seconds = 0.0;
};

DeskRun desk_run(const ProblemInstance& p, const AlgorithmEntry& entry, double alpha0, int N, int log_every) {
  Stopwatch clock;
  DeskRun out;
  out.label = entry.label;
  AlgorithmConfig cfg = entry.sonata;
  cfg.schedule.alpha0 = alpha0;
  const int I = p.agents();
  const GraphSequence seq{GraphModel::RingPlusRandom, 1, I, 1, {}};
  const std::vector<double> alphas = cfg.schedule.values(static_cast<std::size_t>(N) + 1);
  SurrogateSpec tight = cfg.surrogate;
  tight.inner_tolerance = 1e-13;
  const double L = p.L_sum();
  ConsensusState s = initial_state(p, p.initial_point(0));
  int n = 0;
  try {
    for (; n <= N; ++n) {
      if (n % log_every == 0) {
        const double M = merit_report(p, s.x).M;
        if (!std::isfinite(M) || !s.x.allFinite()) throw std::runtime_error("iterates are no longer finite");
        out.final_M = M;
        if (out.hit < 0 && M < 1e-8) out.hit = n;
        const double ex = disagreement(s.x, s.phi), ey = disagreement(s.y, s.phi);
        // The oracle tolerance is absolute, so it follows the size of the iterates.
        tight.inner_tolerance = 1e-13 * std::max(1.0, s.x.lpNorm<Eigen::Infinity>());
        for (int i = 0; i < I; ++i) {
          const Vec x_tilde = solve_subproblem(tight, p, i, s.x.col(i), s.y.col(i));
          const Vec x_hat = best_response_oracle(p, tight, i, s.x.col(i));
          const double tau = tight.tau_for(i);
          const double lhs = (x_hat - x_tilde).norm();
          const double rhs = I / tau * ey + 2.0 * I * L / tau * ex;
          if (!std::isfinite(lhs) || !std::isfinite(rhs)) throw std::runtime_error("best-response bound terms overflowed");
          ++out.bound_checks;
          if (lhs > rhs + 1e-9) ++out.bound_violations;
        }
      }
      if (n == N) break;
      const WeightMatrix A = build_push_sum_weights(generate_snapshot(seq, static_cast<std::uint64_t>(n)));
      s = sonata_iteration(s, cfg, p, A, alphas[n]);
    }
    out.finished = true;
  } catch (const std::exception& e) {
    out.failure = strf("iteration %d: %s", n, e.what());
  }
  out.seconds = clock.seconds();
  return out;
}

std::string describe(const DeskRun& r) {
  if (!r.finished)
    return strf("%s diverged (%s) after %.1f s, best-response bound %d/%d ok before that", r.label.c_str(), r.failure.c_str(),
                r.seconds, r.bound_checks - r.bound_violations, r.bound_checks);
  return strf("%s M<1e-8 at %d, final M %.1e, best-response bound %d/%d ok, %.1f s", r.label.c_str(), r.hit, r.final_M,
              r.bound_checks - r.bound_violations, r.bound_checks, r.seconds);
}

bool succeeded(const DeskRun& r) { return r.finished && r.hit >= 0 && r.final_M < 1e-8 && r.bound_violations == 0; }

Outcome desk_stationarity() {
  const auto cfg = desk_regression(50, 6);
  const ProblemInstance p = build_problem(cfg, 0);
  std::vector<const AlgorithmEntry*> entries;
  for (const auto& a : cfg.algorithms)
    if (a.family == AlgorithmFamily::Sonata) entries.push_back(&a);
  Stopwatch clock;
  bool pass = true;
  std::string literal, relaxed;
  for (const AlgorithmEntry* e : entries) {
    const DeskRun r = desk_run(p, *e, e->sonata.schedule.alpha0, 5000, 10);
    pass = pass && succeeded(r);
    literal += (literal.empty() ? "" : "; ") + describe(r);
  }
  const double t = clock.seconds();
  pass = pass && t < 60.0;
  for (const AlgorithmEntry* e : entries)
    relaxed += (relaxed.empty() ? "" : "; ") + describe(desk_run(p, *e, 0.1, 5000, 10));
  return {pass, strf("alpha0=0.5: %s [%.1f s]. Supplementary alpha0=0.1: %s", literal.c_str(), t, relaxed.c_str())};
}

// ---------------------------------------------------------------------------------------------
// 8. sublinear rate at the constant step bound

Outcome constant_step_rate() {
  const int I = 2;
  const int per_decade = 4, decades = 7;
  Vec h(per_decade * decades + 1);
  for (int k = 0; k < h.size(); ++k) h[k] = std::pow(10.0, -static_cast<double>(k) / per_decade);
  const ProblemInstance p = make_diagonal_quadratic(I, h);
  const GraphSequence seq{GraphModel::StaticUndirected, 0, I, 1, {}};
  const WeightMatrix W = build_metropolis_weights(generate_snapshot(seq, 0));
  AlgorithmConfig cfg;
  cfg.surrogate.kind = SurrogateKind::Linearization;
  cfg.surrogate.tau = {1.0};
  cfg.weights = WeightRule::Metropolis;
  const StepBoundParams b = make_step_bound_params(p, cfg.surrogate, network_constants(I, 1, W.kappa, true), 0.5);
  const double alpha = constant_step_bound(b);
  cfg.schedule = StepSizeSchedule::constant(alpha);

  const long N = 2000000;
  ConsensusState s = initial_state(p, p.initial_point(0));
  double best = merit_report(p, s.x).M;
  std::vector<double> ln_n, ln_m;
  long next_sample = N / 100;
  for (long n = 1; n <= N; ++n) {
    s = sonata_iteration(s, cfg, p, W, alpha);
    best = std::min(best, merit_report(p, s.x).M);
    if (n >= next_sample) {
      ln_n.push_back(std::log10(static_cast<double>(n)));
      ln_m.push_back(std::log10(best));
      next_sample = static_cast<long>(next_sample * 1.05) + 1;
    }
  }
  const double mx = std::accumulate(ln_n.begin(), ln_n.end(), 0.0) / ln_n.size();
  const double my = std::accumulate(ln_m.begin(), ln_m.end(), 0.0) / ln_m.size();
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t k = 0; k < ln_n.size(); ++k) {
    sxy += (ln_n[k] - mx) * (ln_m[k] - my);
    sxx += (ln_n[k] - mx) * (ln_n[k] - mx);
  }
  const double slope = sxy / sxx;
  const bool pass = slope >= -1.25 && slope <= -0.75;
  return {pass, strf("alpha = bound = %.3e, min M over %ld iterations %.2e, tail slope on [%ld, %ld] = %.3f", alpha, N,
                     best, N / 100, N, slope)};
}

// ---------------------------------------------------------------------------------------------
// 9. distributed PCA accuracy

Outcome dpca_accuracy() {
  ExperimentConfig cfg = preset_config("dpca_synthetic_desk");
  ExperimentControls ctl;
  ctl.write_files = false;
  const ExperimentSummary s = run_experiment(cfg, ctl);
  double sonata_worst = 0.0, gp_mean = 0.0, gp_best = 1e300;
  std::string sonata_label, gp_label;
  for (std::size_t k = 0; k < cfg.algorithms.size(); ++k) {
    const auto& outcome = s.algorithms[k];
    if (cfg.algorithms[k].family == AlgorithmFamily::Sonata) {
      sonata_label = outcome.label;
      for (const auto& t : outcome.trials) sonata_worst = std::max(sonata_worst, t.back().NMSE);
    } else {
      gp_label = outcome.label;
      for (const auto& t : outcome.trials) {
        gp_mean += t.back().NMSE / outcome.trials.size();
        for (const auto& r : t) gp_best = std::min(gp_best, r.NMSE);
      }
    }
  }
  const bool pass = sonata_worst <= 1e-6 && gp_best > 1e-4;
  return {pass, strf("%d trials x %llu iterations: %s worst final NMSE %.2e; %s mean final NMSE %.2e, best ever %.2e",
                     cfg.trials, static_cast<unsigned long long>(cfg.n_iters), sonata_label.c_str(), sonata_worst,
                     gp_label.c_str(), gp_mean, gp_best)};
}

// ---------------------------------------------------------------------------------------------
// 10. message exchanges to J <= 1e-2

Outcome comparative_ordering() {
  ExperimentConfig cfg = preset_config("sparse_regression_log_desk");
  ExperimentControls ctl;
  ctl.write_files = false;
  const ExperimentSummary s = run_experiment(cfg, ctl);
  std::vector<double> mean(cfg.algorithms.size(), 0.0);
  std::string detail;
  for (std::size_t k = 0; k < cfg.algorithms.size(); ++k) {
    for (const auto& t : s.algorithms[k].trials) mean[k] += exchanges_to_reach_J(t, 1e-2) / s.algorithms[k].trials.size();
    detail += strf("%s%s %.4g", detail.empty() ? "" : ", ", s.algorithms[k].label.c_str(), mean[k]);
  }
  // Preset order: SONATA-PL, SONATA-L, subgradient-push.
  const bool pass = mean.size() == 3 && mean[0] <= mean[1] && mean[1] < mean[2];
  return {pass, strf("mean exchanges to J_inf <= 1e-2 over %d trials (I=%d, m=%d, alpha0=%.2g): %s", cfg.trials,
                     cfg.problem.agents, cfg.problem.dim, cfg.algorithms[0].sonata.schedule.alpha0, detail.c_str())};
}

// ---------------------------------------------------------------------------------------------
// 11. Lyapunov descent below the constant step bound

Outcome lyapunov_descent() {
  const auto cfg = desk_regression(50, 6);
  const ProblemInstance p = build_problem(cfg, 0);
  const int I = p.agents();
  const GraphSequence seq{GraphModel::StaticUndirected, 0, I, 1, {}};
  const WeightMatrix W = build_metropolis_weights(generate_snapshot(seq, 0));
  const NetworkConstants net = network_constants(I, 1, W.kappa, true);
  bool pass = true;
  std::string detail;
  for (const auto& entry : cfg.algorithms) {
    if (entry.family != AlgorithmFamily::Sonata) continue;
    AlgorithmConfig c = entry.sonata;
    c.weights = WeightRule::Metropolis;
    const StepBoundParams b = make_step_bound_params(p, c.surrogate, net, 0.5);
    const double alpha = 0.9 * constant_step_bound(b);
    c.schedule = StepSizeSchedule::constant(alpha);
    RunOptions opts;
    opts.n_iters = 1000;
    opts.log_every = 100;
    opts.keep_samples = true;
    const RunResult r = run(p, c, seq, opts, 0);
    const LyapunovConstants k = lyapunov_constants(b);
    const auto pts = lyapunov_diagnostics(p, r.samples, k);
    const std::size_t Bb = static_cast<std::size_t>(k.B_bar);
    double worst = -1e300;
    int blocks = 0;
    for (std::size_t n = 0; n + Bb < pts.size(); ++n, ++blocks) worst = std::max(worst, pts[n + Bb].V - pts[n].V);
    const bool ok = blocks > 0 && worst <= 1e-9;
    pass = pass && ok;
    detail += strf("%s%s alpha %.2e, %d blocks, max V increase %.2e, V %.6g -> %.6g", detail.empty() ? "" : "; ",
                   entry.label.c_str(), alpha, blocks, worst, pts.front().V, pts.back().V);
  }
  return {pass, detail + " (static path, Metropolis weights, B_bar = 1)"};
}

struct Criterion {
  int id;
  const char* title;
  Outcome (*fn)();
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::vector<int> only, expect_fail;
  app.add_option("--only", only, "Run only these criteria")->delimiter(',');
  app.add_option("--expect-fail", expect_fail, "Criteria known to fail")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  const Criterion criteria[] = {
      {1, "push-sum invariants", push_sum_invariants},
      {2, "geometric consensus", geometric_consensus},
      {3, "gradient tracking", gradient_tracking},
      {4, "regularizer correctness", regularizers},
      {5, "subproblem oracle agreement", subproblem_oracles},
      {6, "special-case equivalence", special_cases},
      {7, "stationarity at desk scale", desk_stationarity},
      {8, "constant-step rate", constant_step_rate},
      {9, "DPCA accuracy", dpca_accuracy},
      {10, "comparative ordering", comparative_ordering},
      {11, "Lyapunov descent", lyapunov_descent},
  };
  std::set<int> failed;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    Outcome o;
    try {
      o = c.fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) failed.insert(c.id);
    std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", c.id, c.title, o.detail.c_str());
    std::fflush(stdout);
  }
  if (expect_fail.empty()) return failed.empty() ? 0 : 1;
  std::set<int> expected;
  for (int id : expect_fail)
    if (only.empty() || std::find(only.begin(), only.end(), id) != only.end()) expected.insert(id);
  if (failed == expected) {
    std::printf("failing set matches the expected list\n");
    return 0;
  }
  std::printf("failing set differs from the expected list\n");
  return 1;
}
