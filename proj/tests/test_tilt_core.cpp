#include "tilt/tilt_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "tilt/rng.hpp"

using namespace tilt;

namespace {

std::vector<double> random_losses(Rng& rng, std::size_t n, double lo, double hi) {
  std::vector<double> f(n);
  for (auto& x : f) x = rng.uniform(lo, hi);
  return f;
}

}  // namespace

TEST_CASE("tilted_value pinned examples") {
  const std::vector<double> single{3.25};
  for (double t : {-50.0, -1.0, 0.0, 0.5, 100.0})
    CHECK(tilted_value(t, single) == doctest::Approx(3.25).epsilon(1e-15));

  const std::vector<double> f123{1.0, 2.0, 3.0};
  CHECK(tilted_value(0.0, f123) == doctest::Approx(2.0).epsilon(1e-15));

  const std::vector<double> f{0.0, std::log(2.0)};
  CHECK(tilted_value(1.0, f) == doctest::Approx(std::log(1.5)).epsilon(1e-14));

  // large-t sandwich: within [max - log(N)/t, max]
  const double v = tilted_value(100.0, f123);
  CHECK(v <= 3.0);
  CHECK(v >= 3.0 - std::log(3.0) / 100.0);
}

TEST_CASE("tilted_value bounds, monotonicity, equivariance") {
  Rng rng(11);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t n = 1 + static_cast<std::size_t>(rng.below(64));
    const auto f = random_losses(rng, n, -1e3, 1e3);
    const double lo = min_loss(f), hi = max_loss(f);

    double t1 = rng.uniform(-100.0, 100.0);
    double t2 = rng.uniform(-100.0, 100.0);
    if (t2 < t1) std::swap(t1, t2);

    const double v1 = tilted_value(t1, f);
    const double v2 = tilted_value(t2, f);
    CHECK(v1 >= lo);
    CHECK(v1 <= hi);
    CHECK(v1 <= v2 + 1e-12 * std::max(1.0, std::abs(v2)));

    // shift equivariance
    const double c = rng.uniform(-50.0, 50.0);
    std::vector<double> shifted(f.begin(), f.end());
    for (auto& x : shifted) x += c;
    CHECK(tilted_value(t1, shifted) ==
          doctest::Approx(v1 + c).epsilon(0).scale(0).epsilon(1e-10));

    // positive-t sandwich from the limit argument, mirrored for t < 0;
    // equality is attained when a single extreme loss dominates, so allow
    // a few ulps of slack on each side
    const double slack = 1e-9 * std::max({1.0, std::abs(lo), std::abs(hi)});
    if (t2 > 0) {
      const double logn_t2 = std::log(static_cast<double>(n)) / t2;
      CHECK(v2 <= hi);
      CHECK(v2 >= hi - logn_t2 - slack);
    }
    if (t1 < 0) {
      const double logn_t1 = std::log(static_cast<double>(n)) / -t1;
      CHECK(v1 >= lo);
      CHECK(v1 <= lo + logn_t1 + slack);
    }
    CHECK(std::isfinite(v1));
    CHECK(std::isfinite(v2));
  }
}

TEST_CASE("min/max/mean order statistics") {
  const std::vector<double> f{3.0, 1.0, 2.0};
  CHECK(min_loss(f) == 1.0);
  CHECK(max_loss(f) == 3.0);
  CHECK(mean_loss(f) == doctest::Approx(2.0));
  CHECK_THROWS_AS(min_loss(std::span<const double>{}), std::invalid_argument);
}

TEST_CASE("tilt weights") {
  const std::vector<double> f{0.0, std::log(2.0)};

  auto w0 = tilt_weights(0.0, f);
  CHECK(w0.w[0] == 0.5);
  CHECK(w0.w[1] == 0.5);

  auto wp = tilt_weights(1.0, f);
  CHECK(wp.w[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(wp.w[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));

  auto wm = tilt_weights(-1.0, f);
  CHECK(wm.w[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(wm.w[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));

  // w(-t, f) = w(t, -f)
  Rng rng(5);
  auto g = random_losses(rng, 17, -4.0, 4.0);
  std::vector<double> neg(g.begin(), g.end());
  for (auto& x : neg) x = -x;
  auto a = tilt_weights(-1.7, g);
  auto b = tilt_weights(1.7, neg);
  for (std::size_t i = 0; i < g.size(); ++i)
    CHECK(a.w[i] == doctest::Approx(b.w[i]).epsilon(1e-13));
}

TEST_CASE("weight normalization and positivity under extreme spread") {
  Rng rng(23);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t n = 2 + static_cast<std::size_t>(rng.below(100));
    const auto f = random_losses(rng, n, -1e3, 1e3);
    const double t = rng.uniform(-100.0, 100.0);
    const auto tw = tilt_weights(t, f);
    double sum = 0.0;
    for (double w : tw.w) {
      CHECK(w >= 0.0);
      CHECK(std::isfinite(w));
      sum += w;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    // the losses carrying the extreme exponent keep strictly positive weight
    CHECK(*std::max_element(tw.w.begin(), tw.w.end()) > 0.0);
  }
}

TEST_CASE("tilted gradient basics") {
  RowMajor grads;
  grads.rows = 3;
  grads.cols = 2;
  grads.data = {1.0, 0.0, 0.0, 1.0, 1.0, 1.0};
  const std::vector<double> f{1.0, 2.0, 3.0};

  auto g0 = tilted_gradient(0.0, f, grads);
  CHECK(g0[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(g0[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));

  RowMajor one;
  one.rows = 1;
  one.cols = 2;
  one.data = {4.0, -5.0};
  auto g1 = tilted_gradient(7.3, std::vector<double>{0.4}, one);
  CHECK(g1[0] == doctest::Approx(4.0));
  CHECK(g1[1] == doctest::Approx(-5.0));

  CHECK_THROWS_AS(tilted_gradient(1.0, std::vector<double>{1.0, 2.0}, one),
                  std::invalid_argument);
}

TEST_CASE("weight entropy") {
  CHECK(weight_entropy(std::vector<double>{0.25, 0.25, 0.25, 0.25}) ==
        doctest::Approx(std::log(4.0)).epsilon(1e-14));
  CHECK(weight_entropy(std::vector<double>{1.0, 0.0, 0.0}) == 0.0);
  CHECK(weight_entropy(std::vector<double>{1.0 / 3.0, 2.0 / 3.0}) ==
        doctest::Approx(0.6365141682948128).epsilon(1e-12));

  // one-hot limit under a strict max
  const std::vector<double> f{0.0, 1.0, 5.0};
  CHECK(weight_entropy(tilt_weights(400.0, f)) < 1e-10);

  // entropy is maximal at t = 0 and nonincreasing in |t|, on both sides
  Rng rng(31);
  const auto g = random_losses(rng, 24, 0.0, 3.0);
  for (double sign : {1.0, -1.0}) {
    double prev = weight_entropy(tilt_weights(0.0, g));
    CHECK(prev == doctest::Approx(std::log(24.0)).epsilon(1e-12));
    for (double t : {0.3, 0.9, 2.0, 5.0, 20.0}) {
      const double h = weight_entropy(tilt_weights(sign * t, g));
      CHECK(h <= prev + 1e-12);
      prev = h;
    }
  }
}

TEST_CASE("KL decomposition identity") {
  // identical losses: KL term vanishes
  const std::vector<double> c{2.5, 2.5, 2.5};
  CHECK(erm_plus_kl(3.0, c) == doctest::Approx(2.5).epsilon(1e-14));

  const std::vector<double> f{0.0, std::log(2.0)};
  CHECK(erm_plus_kl(1.0, f) == doctest::Approx(std::log(1.5)).epsilon(1e-13));
  CHECK(erm_plus_kl(1.0, f) == doctest::Approx(tilted_value(1.0, f)).epsilon(1e-13));

  Rng rng(47);
  for (int rep = 0; rep < 200; ++rep) {
    const auto g = random_losses(rng, 2 + rng.below(40), -10.0, 10.0);
    double t = rng.uniform(-5.0, 5.0);
    if (std::abs(t) < 1e-3) t = 1e-3;
    CHECK(std::abs(erm_plus_kl(t, g) - tilted_value(t, g)) < 1e-10);
  }
  CHECK_THROWS_AS(erm_plus_kl(0.0, f), std::invalid_argument);
}

TEST_CASE("Renyi cross entropy") {
  const std::vector<double> u4(4, 0.25);

  // rho = 1 path is plain cross entropy
  const std::vector<double> q{0.1, 0.2, 0.3, 0.4};
  double ce = 0.0;
  for (std::size_t i = 0; i < 4; ++i) ce += 0.25 * std::log(1.0 / q[i]);
  CHECK(renyi_cross_entropy(1.0, u4, q) == doctest::Approx(ce).epsilon(1e-14));

  // uniform against itself gives log N for any order
  for (double rho : {-2.0, 0.3, 0.5, 2.0, 7.0})
    CHECK(renyi_cross_entropy(rho, u4, u4) == doctest::Approx(std::log(4.0)).epsilon(1e-12));

  // R(t; f) = H_{1-t}(u || e^{-f}) with the unnormalized likelihood vector
  Rng rng(53);
  for (double t : {-2.0, 0.5, 3.0}) {
    for (int rep = 0; rep < 70; ++rep) {
      const std::size_t n = 2 + rng.below(30);
      const auto f = random_losses(rng, n, 0.0, 10.0);
      std::vector<double> lik(n), u(n, 1.0 / static_cast<double>(n));
      for (std::size_t i = 0; i < n; ++i) lik[i] = std::exp(-f[i]);
      const double lhs = tilted_value(t, f);
      const double rhs = renyi_cross_entropy(1.0 - t, u, lik);
      CHECK(std::abs(lhs - rhs) < 1e-10);
    }
  }

  CHECK_THROWS_AS(renyi_cross_entropy(0.5, u4, std::vector<double>{1.0, -1.0, 0.5, 0.5}),
                  std::invalid_argument);
}

TEST_CASE("DRO dual identity") {
  const std::vector<double> c{1.5, 1.5, 1.5, 1.5};
  CHECK(dro_dual_value(2.0, c) == doctest::Approx(1.5).epsilon(1e-13));

  const std::vector<double> f01{0.0, 1.0};
  CHECK(dro_dual_value(1.0, f01) ==
        doctest::Approx(std::log((1.0 + std::exp(1.0)) / 2.0)).epsilon(1e-13));

  Rng rng(61);
  for (int rep = 0; rep < 200; ++rep) {
    const auto g = random_losses(rng, 2 + rng.below(40), -10.0, 10.0);
    const double t = rng.uniform(1e-2, 8.0);
    CHECK(std::abs(dro_dual_value(t, g) - tilted_value(t, g)) < 1e-10);
  }
  CHECK_THROWS_AS(dro_dual_value(0.0, f01), std::invalid_argument);
  CHECK_THROWS_AS(dro_dual_value(-1.0, f01), std::invalid_argument);
}

TEST_CASE("DRO dual against a brute-force simplex grid") {
  Rng rng(67);
  for (int rep = 0; rep < 5; ++rep) {
    const std::vector<double> f{rng.uniform(0.0, 2.0), rng.uniform(0.0, 2.0),
                                rng.uniform(0.0, 2.0)};
    const double t = rng.uniform(0.5, 3.0);
    const double val = dro_dual_value(t, f);

    const int m = 200;
    double best = -std::numeric_limits<double>::infinity();
    for (int i = 0; i <= m; ++i) {
      for (int j = 0; j <= m - i; ++j) {
        const double q1 = static_cast<double>(i) / m;
        const double q2 = static_cast<double>(j) / m;
        const double q3 = 1.0 - q1 - q2;
        double obj = q1 * f[0] + q2 * f[1] + q3 * f[2];
        for (double q : {q1, q2, q3})
          if (q > 0.0) obj -= q * std::log(3.0 * q) / t;
        best = std::max(best, obj);
      }
    }
    CHECK(val >= best - 1e-12);   // grid can never beat the exact maximizer
    CHECK(val - best < 1e-3);     // and the grid gets within discretization error
  }
}

TEST_CASE("empirical cumulant") {
  const std::vector<double> z{0.0, 0.0};
  CHECK(empirical_cumulant(2.0, z) == 0.0);
  CHECK(empirical_cumulant(0.0, z) == 0.0);

  const std::vector<double> f{0.0, std::log(2.0)};
  CHECK(empirical_cumulant(1.0, f) == doctest::Approx(std::log(1.5)).epsilon(1e-14));

  // R(t; f) = -R(-t; -f), hence cumulants agree under (t, f) -> (-t, -f)
  Rng rng(71);
  for (int rep = 0; rep < 100; ++rep) {
    const auto g = random_losses(rng, 2 + rng.below(20), -8.0, 8.0);
    std::vector<double> neg(g.begin(), g.end());
    for (auto& x : neg) x = -x;
    const double t = rng.uniform(-6.0, 6.0);
    CHECK(tilted_value(t, g) == doctest::Approx(-tilted_value(-t, neg)).epsilon(1e-12));
    CHECK(empirical_cumulant(t, g) ==
          doctest::Approx(empirical_cumulant(-t, neg)).epsilon(1e-12));
  }
}
