#pragma once

// Closed-form stopping threshold for budgeted secretary selection and the
// numerical oracles used to validate it.
//
// Notation: n candidates arrive in random order; the first `alpha` are
// observed and rejected, their best score becomes the acceptance threshold.
// P(r1, r2) is the probability that between r1 and r2 successive
// record-setters appear after position alpha, the last of them being the
// overall best. With x = alpha / n and L = -ln x:
//
//   P(x) = x * sum_{R=r1..r2} L^R / R!
//   dP/dx = L^r2 / r2! - L^(r1-1) / (r1-1)!
//
// The stationary point is L* = (r2! / (r1-1)!)^(1 / (r2 - r1 + 1)).
// All logarithms are natural.

#include <cstdint>

namespace fedsec {

// How alpha* is computed from (r1, r2).
enum class AlphaFormula {
  kClosedForm,  // n * exp(-(r2!/(r1-1)!)^(1/(r2-r1+1)))
  kTableVariant,  // n * exp(-(r2!/(r1-1)!) / (r2-r1+1)), reproduces the published table
};

enum class BudgetCheck {
  kStrict,   // r_max <= n / 10 enforced
  kRelaxed,  // small worked examples (n = 10) where r_max << n cannot hold
};

struct BudgetSpec {
  int n_candidates = 0;
  int budget = 0;
  int r_min = 1;
  int r_max = 1;
  double alpha_star_real = 0.0;
  int alpha_star_index = 0;
};

struct ProbabilityEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::int64_t trials = 0;
};

// Exact k! for 0 <= k <= 20.
std::uint64_t factorial(int k);

// r2! / (r1 - 1)! computed exactly; throws std::overflow_error past 20!.
std::uint64_t factorial_ratio(int r1, int r2);

double alpha_star(int n, int r1, int r2, AlphaFormula formula = AlphaFormula::kClosedForm);

// round-half-up, clamped to [1, n - budget] (0 when budget == n).
int alpha_index(double alpha_real, int n, int budget);

BudgetSpec make_budget(int n, int budget, int r1, int r2,
                       AlphaFormula formula = AlphaFormula::kClosedForm,
                       BudgetCheck check = BudgetCheck::kStrict);

// Budget with an externally fixed threshold index; r_min = r_max = 1 and
// alpha_star_real = alpha_index.
BudgetSpec budget_with_alpha_index(int n, int budget, int alpha_index);

ProbabilityEstimate selection_probability(int n, double alpha, int r1, int r2);

// Same probability as a function of x = alpha / n.
double selection_probability_at(double x, int r1, int r2);

// Analytic dP/dx.
double selection_probability_slope(double x, int r1, int r2);

// Nested harmonic sum K(R, alpha) by memoized recursion.
// Limited to big_r <= 6 and n <= 200.
double k_sum_exact(int big_r, int alpha, int n);

// (ln(n / alpha))^R / R!
double k_sum_approx(int big_r, double alpha, int n);

// Dense scan of P(x) over `grid` points followed by golden-section
// refinement; returns n * argmax.
double alpha_star_numeric(int n, int r1, int r2, int grid);

// Worst-case per-candidate selection probability budget / (n - alpha).
double worst_case_ratio(int n, int budget, double alpha);

inline constexpr int kMaxFactorialArg = 20;
inline constexpr int kKSumMaxDepth = 6;
inline constexpr int kKSumMaxN = 200;

}  // namespace fedsec
