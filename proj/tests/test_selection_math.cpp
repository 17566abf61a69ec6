#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "fedsec/selection_math.hpp"

using namespace fedsec;

namespace {

// Oracle: P(x) summed term by term with tgamma, no shared helpers.
double p_oracle(double x, int r1, int r2) {
  const double l = -std::log(x);
  double s = 0.0;
  for (int r = r1; r <= r2; ++r) s += std::pow(l, r) / std::tgamma(r + 1.0);
  return x * s;
}

double alpha_oracle(int n, int r1, int r2) {
  const double ratio = std::tgamma(r2 + 1.0) / std::tgamma(static_cast<double>(r1));
  return n * std::exp(-std::pow(ratio, 1.0 / (r2 - r1 + 1)));
}

// Brute force over all increasing index chains i_1 < ... < i_R.
double k_sum_brute(int big_r, int alpha, int n, int start, int depth) {
  if (depth == big_r) return 1.0;
  double s = 0.0;
  for (int i = start; i <= n; ++i) s += k_sum_brute(big_r, alpha, n, i + 1, depth + 1) / (i - 1);
  return s;
}

}  // namespace

TEST_CASE("factorials") {
  CHECK(factorial(0) == 1);
  CHECK(factorial(1) == 1);
  CHECK(factorial(5) == 120);
  CHECK(factorial(20) == 2432902008176640000ULL);
  CHECK_THROWS_AS(factorial(21), std::overflow_error);
  CHECK_THROWS_AS(factorial(-1), std::domain_error);
  CHECK(factorial_ratio(2, 4) == 24);
  CHECK(factorial_ratio(1, 1) == 1);
  CHECK_THROWS_AS(factorial_ratio(3, 2), std::domain_error);
}

TEST_CASE("alpha_star matches the closed-form oracle") {
  for (int r1 = 1; r1 <= 5; ++r1) {
    for (int r2 = r1; r2 <= 5; ++r2) {
      CHECK(alpha_star(1000, r1, r2) == doctest::Approx(alpha_oracle(1000, r1, r2)).epsilon(1e-12));
    }
  }
}

TEST_CASE("alpha_star published table rows") {
  // r1 == r2 rows agree under both formulas.
  CHECK(std::abs(alpha_star(1000, 2, 2) - 135.3353) < 1e-3);
  CHECK(std::abs(alpha_star(1000, 3, 3) - 49.7871) < 1e-3);
  CHECK(std::abs(alpha_star(1000, 2, 2, AlphaFormula::kTableVariant) - 135.3353) < 1e-3);
  // Mixed rows only come out of the division form.
  CHECK(std::abs(alpha_star(1000, 2, 3, AlphaFormula::kTableVariant) - 49.7871) < 1e-4);
  CHECK(std::abs(alpha_star(1000, 2, 4, AlphaFormula::kTableVariant) - 0.3355) < 1e-4);
  CHECK(std::abs(alpha_star(1000, 3, 4, AlphaFormula::kTableVariant) - 2.4788) < 1e-4);
  CHECK(alpha_star(1000, 2, 3) == doctest::Approx(86.3376).epsilon(1e-6));
}

TEST_CASE("classical secretary") {
  const double a = alpha_star(1000, 1, 1);
  CHECK(std::abs(a / 1000 - 0.367879) < 1e-5);
  CHECK(std::abs(selection_probability(1000, a, 1, 1).value - std::exp(-1.0)) < 1e-4);
  CHECK(std::abs(alpha_star(1, 1, 1) - std::exp(-1.0)) < 1e-12);
}

TEST_CASE("selection probability and slope") {
  for (double x : {0.01, 0.1, 0.3, 0.6, 0.95}) {
    CHECK(selection_probability_at(x, 1, 3) == doctest::Approx(p_oracle(x, 1, 3)).epsilon(1e-12));
    // Finite-difference check of the analytic slope.
    const double h = 1e-6;
    const double fd = (p_oracle(x + h, 2, 4) - p_oracle(x - h, 2, 4)) / (2 * h);
    CHECK(selection_probability_slope(x, 2, 4) == doctest::Approx(fd).epsilon(1e-6));
  }
  CHECK_THROWS_AS(selection_probability_at(0.0, 1, 1), std::domain_error);
  CHECK_THROWS_AS(selection_probability(100, 100.0, 1, 1), std::domain_error);
}

TEST_CASE("slope vanishes at the closed-form optimum") {
  for (int r1 = 1; r1 <= 5; ++r1) {
    for (int r2 = r1; r2 <= 5; ++r2) {
      const double x = alpha_star(1, r1, r2);
      CHECK(std::abs(selection_probability_slope(x, r1, r2)) < 1e-9);
    }
  }
}

TEST_CASE("probability is additive over disjoint order ranges") {
  for (double x : {0.05, 0.2, 0.5}) {
    const double whole = selection_probability_at(x, 1, 4);
    const double parts = selection_probability_at(x, 1, 2) + selection_probability_at(x, 3, 4);
    CHECK(whole == doctest::Approx(parts).epsilon(1e-12));
  }
}

TEST_CASE("widening the range lowers alpha") {
  for (int r1 = 1; r1 <= 4; ++r1) {
    for (int r2 = r1; r2 < 5; ++r2) {
      CHECK(alpha_star(1000, r1, r2 + 1) < alpha_star(1000, r1, r2));
    }
  }
}

TEST_CASE("alpha index rounding and clamp") {
  CHECK(alpha_index(36.5, 100, 1) == 37);
  CHECK(alpha_index(36.49, 100, 1) == 36);
  CHECK(alpha_index(0.2, 100, 10) == 1);
  CHECK(alpha_index(95.0, 100, 10) == 90);
  CHECK(alpha_index(3.0, 10, 10) == 0);
}

TEST_CASE("make_budget") {
  const auto b = make_budget(100, 10, 1, 4);
  CHECK(b.alpha_star_index == 11);
  CHECK(b.r_min == 1);
  CHECK(b.r_max == 4);
  CHECK_THROWS_AS(make_budget(10, 2, 2, 2), std::domain_error);
  CHECK_NOTHROW(make_budget(10, 2, 2, 2, AlphaFormula::kClosedForm, BudgetCheck::kRelaxed));
  CHECK_THROWS_AS(make_budget(100, 0, 1, 1), std::domain_error);
  CHECK_THROWS_AS(make_budget(100, 101, 1, 1), std::domain_error);
  CHECK_THROWS_AS(budget_with_alpha_index(10, 3, 8), std::domain_error);
  CHECK(budget_with_alpha_index(10, 2, 3).alpha_star_index == 3);
}

TEST_CASE("numeric optimizer agrees with closed form") {
  for (int r1 = 1; r1 <= 5; ++r1) {
    for (int r2 = r1; r2 <= 5; ++r2) {
      CHECK(std::abs(alpha_star_numeric(1000, r1, r2, 100000) - alpha_star(1000, r1, r2)) < 0.5);
    }
  }
  CHECK_THROWS_AS(alpha_star_numeric(1000, 1, 1, 999), std::domain_error);
}

TEST_CASE("table variant is sub-optimal for mixed rows") {
  for (auto [r1, r2] : {std::pair{2, 3}, std::pair{2, 4}, std::pair{3, 4}}) {
    const double table = alpha_star(1, r1, r2, AlphaFormula::kTableVariant);
    const double closed = alpha_star(1, r1, r2);
    CHECK(p_oracle(table, r1, r2) < p_oracle(closed, r1, r2));
  }
}

TEST_CASE("k_sum exact against brute force") {
  for (int big_r = 1; big_r <= 3; ++big_r) {
    for (int alpha : {3, 7, 12}) {
      const int n = 20;
      CHECK(k_sum_exact(big_r, alpha, n) ==
            doctest::Approx(k_sum_brute(big_r, alpha, n, alpha + 1, 0)).epsilon(1e-12));
    }
  }
  CHECK(k_sum_exact(1, 3, 10) == doctest::Approx(1.328968).epsilon(1e-6));
  CHECK(k_sum_exact(1, 1, 2) == 1.0);
  CHECK(k_sum_approx(1, 3.0, 10) == doctest::Approx(std::log(10.0 / 3.0)));
  CHECK(k_sum_exact(2, 10, 100) == doctest::Approx(2.7099549503395686).epsilon(1e-12));
  CHECK_THROWS_AS(k_sum_exact(7, 10, 100), std::out_of_range);
  CHECK_THROWS_AS(k_sum_exact(2, 10, 201), std::out_of_range);
  CHECK_THROWS_AS(k_sum_exact(3, 98, 100), std::domain_error);
}

TEST_CASE("k_sum approximation on the small grid") {
  for (int big_r = 1; big_r <= 3; ++big_r) {
    for (int n : {100, 200}) {
      for (int alpha : {10, 37, 74}) {
        const double exact = k_sum_exact(big_r, alpha, n);
        const double approx = k_sum_approx(big_r, alpha, n);
        const double rel = std::abs(approx - exact) / exact;
        if (big_r == 3 && n == 100 && alpha == 74) {
          // Known outlier: the log-power form overshoots by about 10.8%.
          CHECK(rel == doctest::Approx(0.1081).epsilon(0.01));
        } else {
          CHECK(rel < 0.10);
        }
      }
    }
  }
}

TEST_CASE("worst-case ratio") {
  CHECK(worst_case_ratio(10, 2, 3.0) == doctest::Approx(2.0 / 7.0));
  CHECK_THROWS_AS(worst_case_ratio(10, 8, 3.0), std::domain_error);
}
