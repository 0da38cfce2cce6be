#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <vector>

#include "frugal/core.hpp"

namespace frugal {

inline constexpr double kScoreFloor = 1e-12;
inline constexpr double kMassFloor = 1e-12;

// Temperature of the entropy regularizer. Auto scales the exponent numerator
// by its L2 norm, recomputed at every fixed-point iteration.
struct GammaPolicy {
  bool automatic = true;
  double value = 1.0;

  static GammaPolicy auto_scaled() { return {true, 1.0}; }
  static GammaPolicy fixed(double v) { return {false, v}; }

  friend bool operator==(const GammaPolicy&, const GammaPolicy&) = default;
};

// alpha: diversity, beta: ambiguity, eta: representativity.
struct CriterionWeights {
  double alpha = 1.0;
  double beta = 1.0;
  double eta = 1.0;
  GammaPolicy gamma{};

  void validate() const {
    for (double v : {alpha, beta, eta})
      if (!std::isfinite(v) || v < 0.0) throw ParameterError("weights must be finite and >= 0");
    if (!gamma.automatic && !(gamma.value > 0.0 && std::isfinite(gamma.value)))
      throw ParameterError("fixed gamma must be a finite positive value");
  }

  friend bool operator==(const CriterionWeights&, const CriterionWeights&) = default;
};

// How each fixed-point step combines the exponential map with the current
// iterate.
//
// literal   mu <- normalize(exp(-(numerator)/gamma)), exactly as written.
//           Within a cluster the map raises cluster mass to the power
//           -alpha/gamma, so it only contracts while alpha < gamma and settles
//           into a 2-cycle at alpha == gamma.
// balanced  log mu <- (1 - w) log mu + w * (literal exponent) with
//           w = gamma / (gamma + alpha). Same fixed points; the cluster-mass
//           feedback cancels so it converges for any alpha. Reduces to literal
//           when alpha == 0.
enum class Relaxation { balanced, literal };

struct SolverOptions {
  double epsilon = 1e-6;
  std::size_t maxiter = 100;
  Relaxation relaxation = Relaxation::balanced;
  bool trace_objective = true;
};

struct MembershipVector {
  std::vector<double> mu;
  std::vector<std::size_t> candidate_ids;
  std::size_t iterations_used = 0;
  double final_residual = 0.0;
  bool converged = false;
  bool degenerate_exponent = false;
  std::vector<double> residual_trace;   // L1 change of every step
  std::vector<double> objective_trace;  // objective at every iterate
  std::vector<double> gamma_trace;
  std::vector<std::vector<double>> iterates;  // only filled when requested
};

namespace detail {

inline void check_problem(const Matrix& C, const Matrix& D, const Matrix& F) {
  if (C.rows() != D.rows() || C.rows() != F.rows()) throw ShapeError("solver: C, D and F must have equal row counts");
  if (C.cols() != D.cols()) throw ShapeError("solver: C and D must have equal column counts");
  if (C.rows() == 0) throw PoolExhausted();
  for (std::size_t i = 0; i < F.rows(); ++i) {
    double s = 0.0;
    for (double v : F.row(i)) {
      if (!std::isfinite(v) || v < 0.0) throw ShapeError("solver: F entries must be finite and >= 0");
      s += v;
    }
    if (std::abs(s - 1.0) > 1e-9) throw ShapeError("solver: F row " + std::to_string(i) + " does not sum to 1");
  }
}

// eta * sum_k C_ik D_ik per row.
inline std::vector<double> representativity_rows(const Matrix& C, const Matrix& D) {
  std::vector<double> out(C.rows(), 0.0);
  for (std::size_t i = 0; i < C.rows(); ++i)
    for (std::size_t k = 0; k < C.cols(); ++k) out[i] += C(i, k) * D(i, k);
  return out;
}

// sum_c F_ic log F_ic per row with F clamped to [1e-12, 1].
inline std::vector<double> ambiguity_rows(const Matrix& F) {
  std::vector<double> out(F.rows(), 0.0);
  for (std::size_t i = 0; i < F.rows(); ++i)
    for (double v : F.row(i)) {
      const double f = std::clamp(v, kScoreFloor, 1.0);
      out[i] += f * std::log(f);
    }
  return out;
}

inline std::vector<double> cluster_mass(const Matrix& C, std::span<const double> mu) {
  std::vector<double> p(C.cols(), 0.0);
  for (std::size_t i = 0; i < C.rows(); ++i)
    for (std::size_t k = 0; k < C.cols(); ++k) p[k] += C(i, k) * mu[i];
  return p;
}

inline double l1_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s;
}

inline void normalize_l1(std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  if (!(s > 0.0) || !std::isfinite(s)) throw NumericalError("solver: membership mass is not a positive finite number");
  for (double& x : v) x /= s;
}

}  // namespace detail

// Objective value at mu:
//   eta   sum_i mu_i sum_k C_ik D_ik
// + alpha sum_k p_k log p_k,  p = C' mu
// + beta  sum_i mu_i sum_c F_ic log F_ic
// + gamma sum_i mu_i log mu_i
inline double evaluate_objective(std::span<const double> mu, const Matrix& C, const Matrix& D, const Matrix& F,
                                 const CriterionWeights& w, double gamma) {
  detail::check_problem(C, D, F);
  if (mu.size() != C.rows()) throw ShapeError("objective: mu length does not match rows");
  double total = 0.0;
  for (double v : mu) {
    if (v < 0.0) throw ShapeError("objective: mu has negative entries");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ShapeError("objective: mu is not on the simplex");

  const auto rep = detail::representativity_rows(C, D);
  const auto amb = detail::ambiguity_rows(F);
  const auto p = detail::cluster_mass(C, mu);
  double rep_term = 0.0, amb_term = 0.0, ent_term = 0.0, div_term = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    rep_term += mu[i] * rep[i];
    amb_term += mu[i] * amb[i];
    ent_term += xlogx(mu[i]);
  }
  for (double pk : p) div_term += xlogx(pk);
  return w.eta * rep_term + w.alpha * div_term + w.beta * amb_term + gamma * ent_term;
}

// Precomputed per-row terms for repeated fixed-point steps.
class FixedPointMap {
 public:
  FixedPointMap(const Matrix& C, const Matrix& D, const Matrix& F, const CriterionWeights& w)
      : C_(checked(C, D, F, w)), w_(w), rep_(detail::representativity_rows(C, D)), amb_(detail::ambiguity_rows(F)) {}

  std::size_t size() const noexcept { return rep_.size(); }

  // eta (D.C)1 + alpha C(log[C'mu] + 1) + beta (F.logF)1
  std::vector<double> numerator(std::span<const double> mu) const {
    auto p = detail::cluster_mass(C_, mu);
    for (double& pk : p) pk = std::log(std::max(pk, kMassFloor)) + 1.0;
    std::vector<double> a(rep_.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      double div = 0.0;
      if (w_.alpha != 0.0)
        for (std::size_t k = 0; k < C_.cols(); ++k) div += C_(i, k) * p[k];
      a[i] = w_.eta * rep_[i] + w_.alpha * div + w_.beta * amb_[i];
    }
    return a;
  }

  struct Step {
    std::vector<double> mu;
    double gamma = 0.0;
    bool degenerate = false;
  };

  // One application of the exponential map followed by L1 normalization.
  Step apply(std::span<const double> mu, Relaxation relaxation = Relaxation::literal) const {
    const auto a = numerator(mu);
    Step step;
    if (w_.gamma.automatic) {
      double sq = 0.0;
      for (double v : a) sq += v * v;
      step.gamma = std::sqrt(sq);
    } else {
      step.gamma = w_.gamma.value;
    }
    const std::size_t m = a.size();
    if (!(step.gamma > 0.0)) {
      step.mu.assign(m, 1.0 / static_cast<double>(m));
      step.degenerate = true;
      return step;
    }
    const double lo = *std::min_element(a.begin(), a.end());
    std::vector<double> logits(m);
    for (std::size_t i = 0; i < m; ++i) logits[i] = -(a[i] - lo) / step.gamma;
    if (relaxation == Relaxation::balanced && w_.alpha > 0.0) {
      const double omega = step.gamma / (step.gamma + w_.alpha);
      for (std::size_t i = 0; i < m; ++i)
        logits[i] = (1.0 - omega) * std::log(std::max(mu[i], 1e-300)) + omega * logits[i];
    }
    const double hi = *std::max_element(logits.begin(), logits.end());
    step.mu.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
      step.mu[i] = std::exp(logits[i] - hi);
      if (!std::isfinite(step.mu[i])) throw NumericalError("solver: non-finite membership");
    }
    detail::normalize_l1(step.mu);
    return step;
  }

 private:
  static const Matrix& checked(const Matrix& C, const Matrix& D, const Matrix& F, const CriterionWeights& w) {
    detail::check_problem(C, D, F);
    w.validate();
    return C;
  }

  const Matrix& C_;
  CriterionWeights w_;
  std::vector<double> rep_;
  std::vector<double> amb_;
};

// Seeded random start on the simplex, then fixed-point steps until the L1
// change drops below epsilon or maxiter steps were taken.
inline MembershipVector solve_fixed_point(const Matrix& C, const Matrix& D, const Matrix& F,
                                          const CriterionWeights& w, std::uint64_t seed,
                                          const SolverOptions& opt = {},
                                          std::vector<std::size_t> candidate_ids = {},
                                          bool keep_iterates = false) {
  FixedPointMap map(C, D, F, w);
  const std::size_t m = map.size();
  if (candidate_ids.empty()) {
    candidate_ids.resize(m);
    std::iota(candidate_ids.begin(), candidate_ids.end(), std::size_t{0});
  }
  if (candidate_ids.size() != m) throw ShapeError("solver: candidate id count does not match rows");
  if (opt.maxiter < 1) throw ParameterError("solver: maxiter must be >= 1");
  if (!(opt.epsilon > 0.0)) throw ParameterError("solver: epsilon must be > 0");

  MembershipVector out;
  out.candidate_ids = std::move(candidate_ids);
  Rng rng(seed);
  std::vector<double> mu(m);
  for (double& v : mu) v = rng.uniform_positive();
  detail::normalize_l1(mu);
  if (keep_iterates) out.iterates.push_back(mu);

  for (std::size_t tau = 0; tau < opt.maxiter; ++tau) {
    auto step = map.apply(mu, opt.relaxation);
    const double residual = detail::l1_distance(step.mu, mu);
    mu = std::move(step.mu);
    out.iterations_used = tau + 1;
    out.final_residual = residual;
    out.residual_trace.push_back(residual);
    out.gamma_trace.push_back(step.gamma);
    if (keep_iterates) out.iterates.push_back(mu);
    if (step.degenerate) {
      out.degenerate_exponent = true;
      out.converged = true;
      break;
    }
    if (opt.trace_objective) out.objective_trace.push_back(evaluate_objective(mu, C, D, F, w, step.gamma));
    if (residual < opt.epsilon) {
      out.converged = true;
      break;
    }
  }
  out.mu = std::move(mu);
  return out;
}

struct Selection {
  std::vector<std::size_t> indices;  // pool indices in selection order
  bool pool_exhausted = false;       // nothing will be left for the next round
};

// Candidate ids of the B largest memberships, ties to the lower pool index.
inline Selection select_display(const MembershipVector& mv, std::size_t B) {
  if (B < 1) throw ParameterError("select_display: B must be >= 1");
  const std::size_t m = mv.mu.size();
  if (m == 0) throw PoolExhausted();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (mv.mu[a] != mv.mu[b]) return mv.mu[a] > mv.mu[b];
    return mv.candidate_ids[a] < mv.candidate_ids[b];
  });
  Selection sel;
  const std::size_t take = std::min(B, m);
  sel.indices.reserve(take);
  for (std::size_t r = 0; r < take; ++r) sel.indices.push_back(mv.candidate_ids[order[r]]);
  sel.pool_exhausted = m <= B;
  return sel;
}

}  // namespace frugal
