#pragma once

#include <span>

namespace unideal {

double log_beta(double a, double b);

// I_x(a, b) via the textbook continued fraction (modified Lentz), with the
// symmetry switch at x = (a + 1) / (a + b + 2).
double regularized_incomplete_beta(double x, double a, double b);

double student_t_cdf(double t, double df);

double mean(std::span<const double> xs);

// Unbiased ((n - 1) denominator) standard deviation.
double sample_std(std::span<const double> xs);

struct TTestResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;
};

// Classic two-sample pooled-variance Student's t-test, two-sided p-value.
// Zero pooled variance: equal means give (t = 0, p = 1), unequal means an
// infinite t with p = 0.
TTestResult students_t_test(std::span<const double> a, std::span<const double> b);

}  // namespace unideal
