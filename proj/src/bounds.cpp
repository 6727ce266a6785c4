#include "textcrs/bounds.hpp"

#include <cmath>
#include <stdexcept>

#include "textcrs/rng.hpp"

namespace textcrs {

double normal_cdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }

namespace {

// Acklam's inverse normal CDF approximation (max relative error ~1.15e-9).
double acklam(double q) {
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  if (q < plow) {
    double r = std::sqrt(-2.0 * std::log(q));
    return (((((c[0] * r + c[1]) * r + c[2]) * r + c[3]) * r + c[4]) * r + c[5]) /
           ((((d[0] * r + d[1]) * r + d[2]) * r + d[3]) * r + 1.0);
  }
  if (q > 1.0 - plow) {
    double r = std::sqrt(-2.0 * std::log(1.0 - q));
    return -(((((c[0] * r + c[1]) * r + c[2]) * r + c[3]) * r + c[4]) * r + c[5]) /
           ((((d[0] * r + d[1]) * r + d[2]) * r + d[3]) * r + 1.0);
  }
  double r = q - 0.5;
  double t = r * r;
  return (((((a[0] * t + a[1]) * t + a[2]) * t + a[3]) * t + a[4]) * t + a[5]) * r /
         (((((b[0] * t + b[1]) * t + b[2]) * t + b[3]) * t + b[4]) * t + 1.0);
}

}  // namespace

double inverse_normal_cdf(double q) {
  if (!(q > 0.0 && q < 1.0)) {
    throw std::domain_error("inverse_normal_cdf: q must lie in (0, 1)");
  }
  double x = acklam(q);
  // One Newton step against the exact CDF.
  double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
  if (pdf > 1e-300) {
    x -= (normal_cdf(x) - q) / pdf;
  }
  return x;
}

double RngStream::next_gaussian() { return inverse_normal_cdf(next_unit()); }

double binomial_upper_tail(long long n, double p, long long k) {
  if (k <= 0) return 1.0;
  if (k > n) return 0.0;
  if (p <= 0.0) return 0.0;
  if (p >= 1.0) return 1.0;
  // Sum pmf from i = k upward with the multiplicative recurrence; start from
  // the log pmf at k for stability.
  double logp = std::log(p), log1p_ = std::log1p(-p);
  double logterm = log_binomial(n, k) + k * logp + (n - k) * log1p_;
  if (logterm < -680.0) {
    // The boundary pmf underflows, so one side of k holds essentially all
    // the mass: everything above when the mean exceeds k, else nothing.
    return static_cast<double>(n) * p > static_cast<double>(k) ? 1.0 : 0.0;
  }
  double term = std::exp(logterm);
  double sum = 0.0;
  const double ratio_base = p / (1.0 - p);
  for (long long i = k; i <= n; ++i) {
    sum += term;
    if (i == n) break;
    term *= ratio_base * static_cast<double>(n - i) / static_cast<double>(i + 1);
    // Terms decay geometrically once past the mean; stop when negligible.
    if (term < sum * 1e-18 && static_cast<double>(i) > n * p) break;
  }
  return sum < 1.0 ? sum : 1.0;
}

double clopper_pearson_lower(long long k, long long n, double alpha) {
  if (n < 1 || k < 0 || k > n) {
    throw std::domain_error("clopper_pearson_lower: need 0 <= k <= N, N >= 1");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::domain_error("clopper_pearson_lower: alpha must lie in (0, 1)");
  }
  if (k == 0) return 0.0;
  // tail(p) = P[Bin(n, p) >= k] increases from 0 to 1 in p; bisect to the
  // root tail(p) = alpha.
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 200 && hi - lo > 1e-16; ++it) {
    double mid = 0.5 * (lo + hi);
    if (binomial_upper_tail(n, mid, k) < alpha) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

double log_binomial(long long n, long long k) {
  if (k < 0 || k > n) return -std::numeric_limits<double>::infinity();
  return std::lgamma(static_cast<double>(n) + 1.0) -
         std::lgamma(static_cast<double>(k) + 1.0) -
         std::lgamma(static_cast<double>(n - k) + 1.0);
}

double rad_substitution(double pa, double pb, double epsilon) {
  if (!(epsilon > 0.0)) throw std::domain_error("rad_substitution: epsilon <= 0");
  if (!(pa >= pb && pb >= 0.0 && pa <= 1.0)) {
    throw std::domain_error("rad_substitution: need 1 >= pa >= pb >= 0");
  }
  if (pa == pb) return 0.0;
  double second = -std::log(1.0 - pa + pb) / epsilon;
  if (pb <= 0.0) {
    // First branch diverges; report the finite second branch unless pa = 1.
    return pa >= 1.0 ? kInfiniteRadius : second;
  }
  double first = 0.5 * std::log(pa / pb) / epsilon;
  return std::max(first, second);
}

double rad_substitution_binary(double pa, double epsilon) {
  if (!(epsilon > 0.0)) {
    throw std::domain_error("rad_substitution_binary: epsilon <= 0");
  }
  if (pa <= 0.5) return 0.0;
  if (pa >= 1.0) return kInfiniteRadius;
  return -std::log(2.0 * (1.0 - pa)) / epsilon;
}

double rad_reorder(double pa, double pb, int lambda) {
  if (lambda < 1) throw std::domain_error("rad_reorder: lambda < 1");
  if (!(pa >= pb && pb >= 0.0 && pa <= 1.0)) {
    throw std::domain_error("rad_reorder: need 1 >= pa >= pb >= 0");
  }
  return lambda * (pa - pb);
}

double rad_insertion(double pa, double pb, double sigma) {
  if (sigma < 0.0) throw std::domain_error("rad_insertion: sigma < 0");
  if (!(pa >= pb)) throw std::domain_error("rad_insertion: need pa >= pb");
  // Clamp degenerate estimates away from the quantile poles.
  const double eps = 1e-12;
  double a = std::min(std::max(pa, eps), 1.0 - eps);
  double b = std::min(std::max(pb, eps), 1.0 - eps);
  return 0.5 * sigma * (inverse_normal_cdf(a) - inverse_normal_cdf(b));
}

int rad_deletion(double pa, double pb, int n_alive, double p) {
  if (n_alive < 1) throw std::domain_error("rad_deletion: n_alive < 1");
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("rad_deletion: p not in (0,1)");
  if (!(pa >= pb && pb >= 0.0 && pa <= 1.0)) {
    throw std::domain_error("rad_deletion: need 1 >= pa >= pb >= 0");
  }
  // Neyman-Pearson over survivor sets: deleting delta words leaves likelihood
  // ratio p^-delta on outcomes where the noise deleted all delta words
  // (probability mass p^delta) and 0 elsewhere, so the prediction is stable
  // iff p^delta exceeds 1 - pa + pb. Strictness margin keeps exact boundary
  // ties uncertified.
  double gap = (1.0 - pa) + pb;
  if (gap <= 0.0) return n_alive;
  int radius = 0;
  double mass = 1.0;
  while (radius < n_alive) {
    mass *= p;
    if (!(mass > gap * (1.0 + 1e-12))) break;
    ++radius;
  }
  return radius;
}

bool combined_certificate(double rad_r, double rad_t, double norm_r,
                          double norm_t, int lambda, int n) {
  if (2 * lambda < n) {
    throw std::invalid_argument(
        "combined_certificate: requires full-shuffle smoothing (2*lambda >= n)");
  }
  return norm_r < rad_r && norm_t < rad_t;
}

}  // namespace textcrs
