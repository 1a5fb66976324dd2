#include "unideal/stats.hpp"

#include <cmath>
#include <limits>

#include "unideal/errors.hpp"

namespace unideal {

namespace {

// Continued fraction for the regularized incomplete beta, evaluated with the
// modified Lentz algorithm.
double ibeta_continued_fraction(double x, double a, double b) {
  constexpr double kTiny = 1e-300;
  constexpr double kTol = 1e-15;
  constexpr int kMaxIter = 500;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kTol) break;
  }
  return h;
}

}  // namespace

double log_beta(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

double regularized_incomplete_beta(double x, double a, double b) {
  if (!(a > 0.0) || !(b > 0.0) || !(x >= 0.0 && x <= 1.0)) {
    throw InvalidInputError("regularized_incomplete_beta: need a, b > 0 and x in [0, 1]");
  }
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double front =
      std::exp(a * std::log(x) + b * std::log(1.0 - x) - log_beta(a, b));
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * ibeta_continued_fraction(x, a, b) / a;
  }
  return 1.0 - front * ibeta_continued_fraction(1.0 - x, b, a) / b;
}

double student_t_cdf(double t, double df) {
  if (!(df > 0.0)) {
    throw InvalidInputError("student_t_cdf: df must be positive");
  }
  if (std::isinf(t)) return t > 0.0 ? 1.0 : 0.0;
  const double tail = regularized_incomplete_beta(df / (t * t + df), 0.5 * df, 0.5) / 2.0;
  return t >= 0.0 ? 1.0 - tail : tail;
}

double mean(std::span<const double> xs) {
  if (xs.empty()) {
    throw InvalidInputError("mean of empty sample");
  }
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double sample_std(std::span<const double> xs) {
  if (xs.size() < 2) {
    throw InvalidInputError("sample_std needs at least two observations");
  }
  const double m = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

TTestResult students_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) {
    throw InvalidInputError("students_t_test: both samples need size >= 2");
  }
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  TTestResult out;
  out.df = na + nb - 2.0;
  const double ma = mean(a);
  const double mb = mean(b);
  const double sa = sample_std(a);
  const double sb = sample_std(b);
  const double pooled_var = ((na - 1.0) * sa * sa + (nb - 1.0) * sb * sb) / out.df;
  if (pooled_var == 0.0) {
    if (ma == mb) {
      out.t = 0.0;
      out.p = 1.0;
    } else {
      out.t = ma > mb ? std::numeric_limits<double>::infinity()
                      : -std::numeric_limits<double>::infinity();
      out.p = 0.0;
    }
    return out;
  }
  out.t = (ma - mb) / std::sqrt(pooled_var * (1.0 / na + 1.0 / nb));
  out.p = regularized_incomplete_beta(out.df / (out.t * out.t + out.df), 0.5 * out.df, 0.5);
  return out;
}

}  // namespace unideal
