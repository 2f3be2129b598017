#include "dpc/verify_dp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "dpc/core.hpp"
#include "dpc/error.hpp"
#include "dpc/local.hpp"
#include "dpc/mechanisms.hpp"

namespace dpc {

std::size_t bin_real(double value, double low, double width, std::size_t bins) {
  if (value < low) return 0;
  const double k = std::floor((value - low) / width) + 1.0;
  return k >= static_cast<double>(bins - 1) ? bins - 1 : static_cast<std::size_t>(k);
}

DpCheck empirical_dp_check(std::string name, const OutcomeSampler& on_s, const OutcomeSampler& on_s_prime,
                           std::size_t bins, double epsilon, double delta, std::size_t trials, Rng& rng, double z) {
  if (bins == 0 || trials == 0) throw PreconditionError("empirical_dp_check: need bins and trials");
  std::vector<double> hs(bins, 0.0), ht(bins, 0.0);
  for (std::size_t i = 0; i < trials; ++i) {
    const auto a = on_s(rng);
    const auto b = on_s_prime(rng);
    if (a >= bins || b >= bins) throw PreconditionError("empirical_dp_check: outcome out of range");
    hs[a] += 1.0;
    ht[b] += 1.0;
  }
  const double nt = static_cast<double>(trials);
  const double e = std::exp(epsilon);
  double worst = -std::numeric_limits<double>::infinity();
  std::size_t worst_bin = 0;
  for (std::size_t o = 0; o < bins; ++o) {
    const double p = hs[o] / nt, q = ht[o] / nt;
    for (const auto& [x, y] : {std::pair{p, q}, std::pair{q, p}}) {
      const double excess = x - e * y - delta;
      const double se = std::sqrt(x * (1.0 - x) / nt + e * e * y * (1.0 - y) / nt);
      double score;
      if (se > 0.0)
        score = excess / se;
      else
        score = excess > 0.0 ? std::numeric_limits<double>::infinity() : -1.0;
      if (score > worst) {
        worst = score;
        worst_bin = o;
      }
    }
  }
  DpCheck c;
  c.name = std::move(name);
  c.kind = DpCheck::Kind::Empirical;
  c.epsilon = epsilon;
  c.delta = delta;
  c.trials = trials;
  c.worst = worst;
  c.tolerance = z;
  c.pass = worst <= z;
  std::ostringstream d;
  d << "outcomes=" << bins << " worst_outcome=" << worst_bin;
  c.detail = d.str();
  return c;
}

namespace {

DpCheck analytic(std::string name, double epsilon, double delta, double worst, double tol, std::string detail) {
  DpCheck c;
  c.name = std::move(name);
  c.kind = DpCheck::Kind::Analytic;
  c.epsilon = epsilon;
  c.delta = delta;
  c.worst = worst;
  c.tolerance = tol;
  c.pass = worst <= tol;
  c.detail = std::move(detail);
  return c;
}

double log_laplace_density(double y, double mean, double scale) {
  return -std::abs(y - mean) / scale - std::log(2.0 * scale);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

constexpr double kExact = 1e-12;

std::string fmt(double v) {
  std::ostringstream o;
  o << v;
  return o.str();
}

// Largest log density ratio of two Laplace outputs over sampled points, minus eps.
double laplace_ratio_excess(double x, double x_prime, double scale, double epsilon, Rng& rng) {
  const double lo = std::min(x, x_prime) - 10.0 * scale, hi = std::max(x, x_prime) + 10.0 * scale;
  double worst = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < 100; ++i) {
    const double y = lo + (hi - lo) * rng.uniform();
    const double r = std::abs(log_laplace_density(y, x, scale) - log_laplace_density(y, x_prime, scale));
    worst = std::max(worst, r - epsilon);
  }
  return worst;
}

double clamp_r_input(double x, double b) { return (x < 0.0 || x > b) ? 0.0 : x; }

}  // namespace

std::vector<DpCheck> verify_dp(const VerifyOptions& o) {
  const double eps = o.epsilon;
  const std::size_t n = o.trials;
  Rng rng(o.seed);
  std::vector<DpCheck> out;

  // ---- analytic ----
  {
    const double p = rr_keep_probability(eps);
    const double lr = std::log(p / (1.0 - p));
    out.push_back(analytic("randomized_response.ratio", eps, 0.0, lr - eps, kExact,
                           "log(keep/flip)=" + fmt(lr)));
  }
  {
    Rng r = rng.split();
    const double w = laplace_ratio_excess(2.0, 3.0, 1.0 / eps, eps, r);
    out.push_back(analytic("laplace.density_ratio", eps, 0.0, w, kExact, "inputs 2,3 sensitivity 1, 100 points"));
  }
  {
    Rng r = rng.split();
    const double b = 1.0;
    double w = -std::numeric_limits<double>::infinity();
    const std::vector<double> xs{0.0, 0.5 * b, b, 1.5 * b, -0.5 * b};
    for (double x : xs)
      for (double y : xs)
        w = std::max(w, laplace_ratio_excess(clamp_r_input(x, b), clamp_r_input(y, b), b / eps, eps, r));
    out.push_back(analytic("randomizer_R.density_ratio", eps, 0.0, w, kExact, "b=1, inputs {0,b/2,b,1.5b,-b/2}"));
  }
  {
    // Hadamard report (row, bit): the row is input-independent, the bit is
    // randomized response on a +-1 value.
    const double p = rr_keep_probability(eps);
    const double lr = std::log(p / (1.0 - p));
    out.push_back(analytic("hadamard_encoder.ratio", eps, 0.0, lr - eps, kExact, "row uniform, bit kept w.p. keep"));
  }
  {
    // Exact privacy profile of the Gaussian mechanism at the calibrated sigma.
    const double ge = o.gaussian_epsilon;
    const double s = gaussian_sigma(1.0, ge, o.delta);
    const double a = 1.0 / (2.0 * s), b = ge * s;
    const double d = normal_cdf(a - b) - std::exp(ge) * normal_cdf(-a - b);
    out.push_back(analytic("gaussian.privacy_profile", ge, o.delta, d - o.delta, 0.0,
                           "sigma=" + fmt(s) + " delta(eps)=" + fmt(d)));
  }

  // ---- empirical ----
  auto add = [&](std::string name, const OutcomeSampler& a, const OutcomeSampler& b, std::size_t bins, double e,
                 double d) {
    Rng r = rng.split();
    out.push_back(empirical_dp_check(std::move(name), a, b, bins, e, d, n, r));
  };

  {
    auto rr = [eps](std::uint8_t bit) {
      return [eps, bit](Rng& r) {
        const std::uint8_t one[1] = {bit};
        return ldp_count(std::span<const std::uint8_t>(one, 1), eps, r).value > 0.5 ? std::size_t{1}
                                                                                         : std::size_t{0};
      };
    };
    add("randomized_response", rr(0), rr(1), 2, eps, 0.0);
  }
  auto count_sampler = [](double count, const std::function<double(double, Rng&)>& mech) {
    return [count, mech](Rng& r) { return bin_real(mech(count, r), -1.0, 1.0, 8); };
  };
  {
    auto lap = [eps](double c, Rng& r) {
      Point v(1);
      v(0) = c;
      return laplace_mechanism(v, 1.0, eps, r)(0);
    };
    // Bit databases {1,1,0} and {1,1,1}.
    add("laplace.count", count_sampler(2.0, lap), count_sampler(3.0, lap), 8, eps, 0.0);
  }
  {
    const double ge = o.gaussian_epsilon, gd = o.delta;
    const double sigma = gaussian_sigma(1.0, ge, gd);
    auto gauss = [ge, gd](double c, Rng& r) {
      Point v(1);
      v(0) = c;
      return gaussian_mechanism(v, 1.0, ge, gd, r)(0);
    };
    auto g = [gauss, sigma](double c) {
      return [gauss, sigma, c](Rng& r) { return bin_real(gauss(c, r), -3.0 * sigma, sigma, 8); };
    };
    add("gaussian.count", g(2.0), g(3.0), 8, ge, gd);
  }
  {
    auto rr = [eps](double x) {
      return [eps, x](Rng& r) { return bin_real(randomizer_R(x, eps, 1.0, r), -1.0, 0.5, 8); };
    };
    add("randomizer_R", rr(0.0), rr(1.0), 8, eps, 0.0);
    add("randomizer_R.out_of_range", rr(1.7), rr(1.0), 8, eps, 0.0);
  }
  {
    auto hr = [eps](std::uint64_t v) {
      return [eps, v](Rng& r) {
        const Message m = hadamard_encode(v, 4, eps, r);
        return static_cast<std::size_t>(m.index * 2 + (m.value > 0 ? 1 : 0));
      };
    };
    add("hadamard_encoder", hr(0), hr(3), 8, eps, 0.0);
  }
  {
    // Three sensitivity-1 queries; the neighbor shifts each by one.
    auto svt = [eps](std::vector<double> qs) {
      return [eps, qs](Rng& r) {
        SvtSession s(2.5, eps, r);
        for (std::size_t i = 0; i < qs.size(); ++i)
          if (s.query(qs[i], r)) return i;
        return qs.size();
      };
    };
    add("sparse_vector", svt({1.0, 2.0, 3.0}), svt({2.0, 3.0, 4.0}), 4, eps, 0.0);
  }
  {
    // One point moves between bins 0 and 1.
    auto rnm = [eps](std::vector<double> counts) {
      return [eps, counts](Rng& r) { return report_noisy_max(counts, eps, r); };
    };
    add("report_noisy_max", rnm({2.0, 1.0, 0.0}), rnm({1.0, 2.0, 0.0}), 3, eps, 0.0);
  }
  {
    // n = 4: bin 1 exists only in the neighbor, so its release must be delta-rare.
    const double he = 16.0, hd = 0.05, hb = 0.5;
    const double t = std::ceil(10.0 * std::max(stable_histogram_floor(4, he, hd, hb),
                                               2.0 * (1.0 + 2.0 / he * std::log(2.0 / hd)))) /
                     10.0;
    auto hist = [=](std::map<std::uint64_t, std::size_t> bins) {
      return [=](Rng& r) {
        std::size_t mask = 0;
        for (const auto& rel : stable_histogram(bins, 4, t, he, hd, hb, r)) mask |= std::size_t{1} << rel.bin;
        return mask;
      };
    };
    add("stable_histogram", hist({{0, 4}}), hist({{0, 3}, {1, 1}}), 4, he, hd);
  }
  if (o.inject_broken) {
    auto half = [eps](double c, Rng& r) { return c + r.laplace(0.5 / eps); };
    add("broken.laplace_half_noise", count_sampler(2.0, half), count_sampler(3.0, half), 8, eps, 0.0);
  }
  return out;
}

}  // namespace dpc
