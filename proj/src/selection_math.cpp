#include "fedsec/selection_math.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace fedsec {
namespace {

void require_orders(int r1, int r2) {
  if (r1 < 1 || r2 < r1) {
    throw std::domain_error("require 1 <= r1 <= r2, got r1=" + std::to_string(r1) +
                            " r2=" + std::to_string(r2));
  }
}

void require_open_alpha(int n, double alpha) {
  if (!(alpha > 0.0) || !(alpha < static_cast<double>(n))) {
    throw std::domain_error("alpha must lie in (0, n)");
  }
}

}  // namespace

std::uint64_t factorial(int k) {
  if (k < 0) throw std::domain_error("factorial of a negative number");
  if (k > kMaxFactorialArg) throw std::overflow_error("factorial argument exceeds 20");
  std::uint64_t out = 1;
  for (int i = 2; i <= k; ++i) out *= static_cast<std::uint64_t>(i);
  return out;
}

std::uint64_t factorial_ratio(int r1, int r2) {
  require_orders(r1, r2);
  if (r2 > kMaxFactorialArg) throw std::overflow_error("factorial argument exceeds 20");
  std::uint64_t out = 1;
  for (int i = r1; i <= r2; ++i) out *= static_cast<std::uint64_t>(i);
  return out;
}

double alpha_star(int n, int r1, int r2, AlphaFormula formula) {
  if (n < 1) throw std::domain_error("n must be positive");
  const auto ratio = static_cast<double>(factorial_ratio(r1, r2));
  const double span = static_cast<double>(r2 - r1 + 1);
  const double exponent =
      formula == AlphaFormula::kClosedForm ? std::pow(ratio, 1.0 / span) : ratio / span;
  return static_cast<double>(n) * std::exp(-exponent);
}

int alpha_index(double alpha_real, int n, int budget) {
  const int upper = n - budget;
  if (upper < 1) return std::max(upper, 0);
  const auto rounded = static_cast<long long>(std::floor(alpha_real + 0.5));
  return static_cast<int>(std::clamp<long long>(rounded, 1, upper));
}

BudgetSpec make_budget(int n, int budget, int r1, int r2, AlphaFormula formula,
                       BudgetCheck check) {
  require_orders(r1, r2);
  if (n < 1) throw std::domain_error("n_candidates must be positive");
  if (budget < 1 || budget > n) throw std::domain_error("budget must lie in [1, n_candidates]");
  if (check == BudgetCheck::kStrict && static_cast<long long>(r2) * 10 > n) {
    throw std::domain_error("r_max must be at most n_candidates / 10");
  }
  BudgetSpec spec;
  spec.n_candidates = n;
  spec.budget = budget;
  spec.r_min = r1;
  spec.r_max = r2;
  spec.alpha_star_real = alpha_star(n, r1, r2, formula);
  spec.alpha_star_index = alpha_index(spec.alpha_star_real, n, budget);
  return spec;
}

BudgetSpec budget_with_alpha_index(int n, int budget, int alpha_idx) {
  if (n < 1) throw std::domain_error("n_candidates must be positive");
  if (budget < 1 || budget > n) throw std::domain_error("budget must lie in [1, n_candidates]");
  if (alpha_idx < 0 || alpha_idx > n - budget) {
    throw std::domain_error("alpha index must lie in [0, n - budget]");
  }
  BudgetSpec spec;
  spec.n_candidates = n;
  spec.budget = budget;
  spec.alpha_star_real = alpha_idx;
  spec.alpha_star_index = alpha_idx;
  return spec;
}

double selection_probability_at(double x, int r1, int r2) {
  require_orders(r1, r2);
  if (!(x > 0.0) || !(x < 1.0)) throw std::domain_error("x must lie in (0, 1)");
  const double log_term = -std::log(x);
  double sum = 0.0;
  for (int r = r1; r <= r2; ++r) {
    sum += std::pow(log_term, r) / static_cast<double>(factorial(r));
  }
  return x * sum;
}

ProbabilityEstimate selection_probability(int n, double alpha, int r1, int r2) {
  require_open_alpha(n, alpha);
  return {selection_probability_at(alpha / static_cast<double>(n), r1, r2), 0.0, 0};
}

double selection_probability_slope(double x, int r1, int r2) {
  require_orders(r1, r2);
  if (!(x > 0.0) || !(x < 1.0)) throw std::domain_error("x must lie in (0, 1)");
  const double log_term = -std::log(x);
  return std::pow(log_term, r2) / static_cast<double>(factorial(r2)) -
         std::pow(log_term, r1 - 1) / static_cast<double>(factorial(r1 - 1));
}

double k_sum_exact(int big_r, int alpha, int n) {
  if (big_r < 1 || alpha < 1) throw std::domain_error("big_r and alpha must be positive");
  if (big_r > kKSumMaxDepth || n > kKSumMaxN) {
    throw std::out_of_range("exact K-sum limited to R <= 6 and n <= 200");
  }
  if (alpha + big_r > n) throw std::domain_error("require alpha + R <= n");

  // memo[depth][start]: sum over the innermost `depth` indices with the
  // outermost of them starting at `start`.
  std::vector<std::vector<double>> memo(big_r + 1, std::vector<double>(n + 2, -1.0));
  auto level = [&](auto&& self, int depth, int start) -> double {
    if (depth == 0) return 1.0;
    double& slot = memo[depth][start];
    if (slot >= 0.0) return slot;
    double total = 0.0;
    for (int i = start; i <= n - depth + 1; ++i) {
      total += self(self, depth - 1, i + 1) / static_cast<double>(i - 1);
    }
    slot = total;
    return total;
  };
  return level(level, big_r, alpha + 1);
}

double k_sum_approx(int big_r, double alpha, int n) {
  if (big_r < 1) throw std::domain_error("big_r must be positive");
  require_open_alpha(n, alpha);
  return std::pow(std::log(static_cast<double>(n) / alpha), big_r) /
         static_cast<double>(factorial(big_r));
}

double alpha_star_numeric(int n, int r1, int r2, int grid) {
  if (n < 1) throw std::domain_error("n must be positive");
  if (grid < 1000) throw std::domain_error("grid must be at least 1000");
  require_orders(r1, r2);

  const double step = 1.0 / grid;
  int best_k = 1;
  double best_p = -1.0;
  for (int k = 1; k < grid; ++k) {
    const double p = selection_probability_at(k * step, r1, r2);
    if (p > best_p) {
      best_p = p;
      best_k = k;
    }
  }

  double lo = std::max((best_k - 1) * step, step * 1e-6);
  double hi = std::min((best_k + 1) * step, 1.0 - step * 1e-6);
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = hi - inv_phi * (hi - lo);
  double b = lo + inv_phi * (hi - lo);
  double fa = selection_probability_at(a, r1, r2);
  double fb = selection_probability_at(b, r1, r2);
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    if (fa < fb) {
      lo = a;
      a = b;
      fa = fb;
      b = lo + inv_phi * (hi - lo);
      fb = selection_probability_at(b, r1, r2);
    } else {
      hi = b;
      b = a;
      fb = fa;
      a = hi - inv_phi * (hi - lo);
      fa = selection_probability_at(a, r1, r2);
    }
  }
  return static_cast<double>(n) * 0.5 * (lo + hi);
}

double worst_case_ratio(int n, int budget, double alpha) {
  require_open_alpha(n, alpha);
  const double remaining = static_cast<double>(n) - alpha;
  if (budget < 1 || static_cast<double>(budget) > remaining) {
    throw std::domain_error("budget must lie in [1, n - alpha]");
  }
  return static_cast<double>(budget) / remaining;
}

}  // namespace fedsec
