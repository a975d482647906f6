#include "truncgraph/truncdist.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "truncgraph/errors.hpp"

namespace truncgraph {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kLogSqrt2Pi = 0.91893853320467274178;

void check_sigma(double sigma, const char* where) {
  if (!(std::abs(sigma) <= 1.0 - kKernelBoundaryGap)) {
    throw DomainError(std::string(where) + ": |sigma| must not exceed 1 - " +
                      std::to_string(kKernelBoundaryGap) + ", got " + std::to_string(sigma));
  }
}

// Probability mass of a standard normal outside [a, b] once its mean is
// shifted to `mean` and its scale set to `sd`. Both tails are evaluated
// directly so no cancellation occurs when the window is wide.
double outside_mass(double a, double b, double mean, double sd) {
  return std_normal_cdf((a - mean) / sd) + std_normal_cdf((mean - b) / sd);
}

// Gauss-Legendre half-rules (abscissae in (0, 1), weights) used by the
// Drezner-Wesolowsky / Genz bivariate normal algorithm.
struct HalfRule {
  std::array<double, 10> x;
  std::array<double, 10> w;
  int size;
};

constexpr HalfRule kRule6{{0.9324695142031522, 0.6612093864662647, 0.2386191860831970},
                          {0.1713244923791705, 0.3607615730481384, 0.4679139345726904},
                          3};
constexpr HalfRule kRule12{{0.9815606342467191, 0.9041172563704750, 0.7699026741943050,
                            0.5873179542866171, 0.3678314989981802, 0.1252334085114692},
                           {0.04717533638651177, 0.1069393259953183, 0.1600783285433464,
                            0.2031674267230659, 0.2334925365383547, 0.2491470458134029},
                           6};
constexpr HalfRule kRule20{{0.9931285991850949, 0.9639719272779138, 0.9122344282513259,
                            0.8391169718222188, 0.7463319064601508, 0.6360536807265150,
                            0.5108670019508271, 0.3737060887154196, 0.2277858511416451,
                            0.07652652113349733},
                           {0.01761400713915212, 0.04060142980038694, 0.06267204833410906,
                            0.08327674157670475, 0.1019301198172404, 0.1181945319615184,
                            0.1316886384491766, 0.1420961093183821, 0.1491729864726037,
                            0.1527533871307259},
                           10};

}  // namespace

TruncationScheme::TruncationScheme(std::vector<double> lower, std::vector<double> upper)
    : lower_(std::move(lower)), upper_(std::move(upper)) {
  if (lower_.size() != upper_.size()) {
    throw ValidationError("truncation scheme: lower has " + std::to_string(lower_.size()) +
                          " entries but upper has " + std::to_string(upper_.size()));
  }
  if (lower_.size() < 2) {
    throw ValidationError("truncation scheme: dimension must be at least 2");
  }
  for (std::size_t j = 0; j < lower_.size(); ++j) {
    if (!std::isfinite(lower_[j]) || !std::isfinite(upper_[j])) {
      throw ValidationError("truncation scheme: non-finite bound for variable " +
                            std::to_string(j + 1));
    }
    if (!(lower_[j] < upper_[j])) {
      throw ValidationError("truncation scheme: lower bound must be below upper bound for variable " +
                            std::to_string(j + 1));
    }
  }
}

double TruncationScheme::censoring_probability(std::size_t j) const {
  return outside_mass(lower_.at(j), upper_.at(j), 0.0, 1.0);
}

PairBounds::PairBounds(double aj, double bj, double ak, double bk)
    : lower_j(aj), upper_j(bj), lower_k(ak), upper_k(bk) {
  if (!std::isfinite(aj) || !std::isfinite(bj) || !std::isfinite(ak) || !std::isfinite(bk)) {
    throw ValidationError("pair bounds must be finite");
  }
  if (!(aj < bj) || !(ak < bk)) {
    throw ValidationError("pair bounds: each window needs lower < upper");
  }
}

PairBounds PairBounds::of(const TruncationScheme& scheme, std::size_t j, std::size_t k) {
  return {scheme.lower(j), scheme.upper(j), scheme.lower(k), scheme.upper(k)};
}

double std_normal_pdf(double x) { return std::exp(-0.5 * x * x - kLogSqrt2Pi); }

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }

double phi11(double sigma, double y_j, double y_k) {
  check_sigma(sigma, "phi11");
  const double one_minus = 1.0 - sigma * sigma;
  const double quad = (y_j * y_j + y_k * y_k) - 2.0 * sigma * (y_j * y_k);
  return std::exp(-quad / (2.0 * one_minus)) / (kTwoPi * std::sqrt(one_minus));
}

double phi01(double sigma, double y_k, const PairBounds& bounds) {
  check_sigma(sigma, "phi01");
  const double sd = std::sqrt(1.0 - sigma * sigma);
  return std_normal_pdf(y_k) * outside_mass(bounds.lower_j, bounds.upper_j, sigma * y_k, sd);
}

double phi10(double sigma, double y_j, const PairBounds& bounds) {
  return phi01(sigma, y_j, bounds.swapped());
}

double log_phi01(double sigma, double y_k, const PairBounds& bounds) {
  check_sigma(sigma, "log_phi01");
  const double sd = std::sqrt(1.0 - sigma * sigma);
  return -0.5 * y_k * y_k - kLogSqrt2Pi +
         std::log(outside_mass(bounds.lower_j, bounds.upper_j, sigma * y_k, sd));
}

double log_phi10(double sigma, double y_j, const PairBounds& bounds) {
  return log_phi01(sigma, y_j, bounds.swapped());
}

double phi00(double sigma, const PairBounds& bounds) {
  check_sigma(sigma, "phi00");
  // Inclusion-exclusion over the two windows: the outer region is the plane
  // minus both strips plus their intersection.
  const double inside_j = 1.0 - outside_mass(bounds.lower_j, bounds.upper_j, 0.0, 1.0);
  const double inside_k = 1.0 - outside_mass(bounds.lower_k, bounds.upper_k, 0.0, 1.0);
  const double box = bivariate_rectangle_prob(sigma, bounds.lower_j, bounds.upper_j,
                                              bounds.lower_k, bounds.upper_k);
  return std::clamp(1.0 - inside_j - inside_k + box, 0.0, 1.0);
}

double bivariate_normal_upper(double h, double k, double rho) {
  if (h == INFINITY || k == INFINITY) return 0.0;
  if (h == -INFINITY) return k == -INFINITY ? 1.0 : std_normal_cdf(-k);
  if (k == -INFINITY) return std_normal_cdf(-h);
  if (rho == 0.0) return std_normal_cdf(-h) * std_normal_cdf(-k);

  const HalfRule& rule = std::abs(rho) < 0.3 ? kRule6 : std::abs(rho) < 0.75 ? kRule12 : kRule20;
  double hk = h * k;
  double bvn = 0.0;

  if (std::abs(rho) < 0.925) {
    const double hs = (h * h + k * k) / 2.0;
    const double asr = std::asin(rho) / 2.0;
    for (int i = 0; i < rule.size; ++i) {
      for (double sign : {-1.0, 1.0}) {
        const double sn = std::sin(asr * (1.0 + sign * rule.x[i]));
        bvn += rule.w[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
      }
    }
    return std::clamp(bvn * asr / kTwoPi + std_normal_cdf(-h) * std_normal_cdf(-k), 0.0, 1.0);
  }

  if (rho < 0.0) {
    k = -k;
    hk = -hk;
  }
  if (std::abs(rho) < 1.0) {
    const double as = (1.0 - rho) * (1.0 + rho);
    double a = std::sqrt(as);
    const double bs = (h - k) * (h - k);
    const double c = (4.0 - hk) / 8.0;
    const double d = (12.0 - hk) / 80.0;
    double asr = -(bs / as + hk) / 2.0;
    if (asr > -100.0) {
      bvn = a * std::exp(asr) * (1.0 - c * (bs - as) * (1.0 - d * bs) / 3.0 + c * d * as * as);
    }
    if (hk > -100.0) {
      const double b = std::sqrt(bs);
      const double sp = std::sqrt(kTwoPi) * std_normal_cdf(-b / a);
      bvn -= std::exp(-hk / 2.0) * sp * b * (1.0 - c * bs * (1.0 - d * bs) / 3.0);
    }
    a /= 2.0;
    double sum = 0.0;
    for (int i = 0; i < rule.size; ++i) {
      for (double sign : {-1.0, 1.0}) {
        const double xs = std::pow(a * (1.0 + sign * rule.x[i]), 2);
        asr = -(bs / xs + hk) / 2.0;
        if (asr > -100.0) {
          const double sp = 1.0 + c * xs * (1.0 + 5.0 * d * xs);
          const double rs = std::sqrt(1.0 - xs);
          const double ep = std::exp(-(hk / 2.0) * xs / ((1.0 + rs) * (1.0 + rs))) / rs;
          sum += rule.w[i] * std::exp(asr) * (sp - ep);
        }
      }
    }
    bvn = (a * sum - bvn) / kTwoPi;
  }
  if (rho > 0.0) {
    bvn += std_normal_cdf(-std::max(h, k));
  } else if (h >= k) {
    bvn = -bvn;
  } else {
    const double band = h < 0.0 ? std_normal_cdf(k) - std_normal_cdf(h)
                                : std_normal_cdf(-h) - std_normal_cdf(-k);
    bvn = band - bvn;
  }
  return std::clamp(bvn, 0.0, 1.0);
}

double bivariate_rectangle_prob(double sigma, double x_lo, double x_hi, double y_lo,
                                double y_hi) {
  if (!(x_lo < x_hi) || !(y_lo < y_hi)) {
    throw DomainError("bivariate_rectangle_prob: rectangle needs x_lo < x_hi and y_lo < y_hi");
  }
  check_sigma(sigma, "bivariate_rectangle_prob");
  const double p = bivariate_normal_upper(x_lo, y_lo, sigma) -
                   bivariate_normal_upper(x_hi, y_lo, sigma) -
                   bivariate_normal_upper(x_lo, y_hi, sigma) +
                   bivariate_normal_upper(x_hi, y_hi, sigma);
  return std::clamp(p, 0.0, 1.0);
}

double normalization_defect(double sigma, const PairBounds& bounds) {
  using boost::math::quadrature::gauss_kronrod;
  constexpr unsigned kDepth = 20;
  constexpr double kTol = 1e-13;

  const double mass00 = phi00(sigma, bounds);
  const double mass01 = gauss_kronrod<double, 31>::integrate(
      [&](double y) { return phi01(sigma, y, bounds); }, bounds.lower_k, bounds.upper_k, kDepth,
      kTol);
  const double mass10 = gauss_kronrod<double, 31>::integrate(
      [&](double y) { return phi10(sigma, y, bounds); }, bounds.lower_j, bounds.upper_j, kDepth,
      kTol);
  const double mass11 = gauss_kronrod<double, 31>::integrate(
      [&](double y) {
        return gauss_kronrod<double, 31>::integrate(
            [&](double x) { return phi11(sigma, x, y); }, bounds.lower_j, bounds.upper_j, kDepth,
            kTol);
      },
      bounds.lower_k, bounds.upper_k, kDepth, kTol);
  return std::abs(mass00 + mass01 + mass10 + mass11 - 1.0);
}

}  // namespace truncgraph
