#include "tilt/hierarchy.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "tilt/rng.hpp"
#include "tilt/tilt_core.hpp"

using namespace tilt;

namespace {

Dataset grouped_linear(Rng& rng, std::size_t n, std::size_t d, std::size_t g_count) {
  Dataset ds;
  ds.n = n;
  ds.d = d;
  ds.features.resize(n * d);
  ds.targets.resize(n);
  ds.groups.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) ds.features[i * d + j] = rng.normal();
    ds.targets[i] = 0.4 * rng.normal();
    ds.groups[i] = static_cast<std::int32_t>(i % g_count);
  }
  return ds;
}

GroupIndex index_of_sizes(const std::vector<std::size_t>& sizes) {
  GroupIndex gi;
  std::size_t next = 0;
  for (std::size_t s : sizes) {
    std::vector<std::size_t> m(s);
    std::iota(m.begin(), m.end(), next);
    next += s;
    gi.members.push_back(std::move(m));
  }
  return gi;
}

}  // namespace

TEST_CASE("group tilted losses") {
  // single group reduces to the flat tilted value
  const std::vector<double> f{0.0, std::log(2.0)};
  const auto gi1 = index_of_sizes({2});
  const auto r1 = group_tilted_losses(1.0, f, gi1);
  CHECK(r1[0] == doctest::Approx(std::log(1.5)).epsilon(1e-14));

  // tau = 0 gives group means
  const std::vector<double> f2{1.0, 3.0, 10.0, 20.0};
  const auto gi2 = index_of_sizes({2, 2});
  const auto r2 = group_tilted_losses(0.0, f2, gi2);
  CHECK(r2[0] == doctest::Approx(2.0));
  CHECK(r2[1] == doctest::Approx(15.0));
}

TEST_CASE("hierarchical value") {
  Rng rng(421);

  SUBCASE("t = tau collapses to the flat tilted value") {
    for (double t : {-2.0, -0.5, 0.7, 3.0}) {
      std::vector<double> f(30);
      for (auto& v : f) v = rng.uniform(0.0, 4.0);
      const auto gi = index_of_sizes({7, 11, 12});
      const double hier = hierarchical_value({t, t}, f, gi);
      CHECK(std::abs(hier - tilted_value(t, f)) < 1e-12);
    }
  }

  SUBCASE("single group ignores t") {
    std::vector<double> f(12);
    for (auto& v : f) v = rng.uniform(0.0, 2.0);
    const auto gi = index_of_sizes({12});
    for (double t : {-5.0, 0.0, 9.0})
      CHECK(hierarchical_value({t, 1.3}, f, gi) ==
            doctest::Approx(tilted_value(1.3, f)).epsilon(1e-13));
  }

  SUBCASE("t = 0, tau = 0 is the overall mean") {
    std::vector<double> f(24);
    for (auto& v : f) v = rng.uniform(-3.0, 3.0);
    const auto gi = index_of_sizes({6, 6, 12});
    CHECK(hierarchical_value({0.0, 0.0}, f, gi) ==
          doctest::Approx(mean_loss(f)).epsilon(1e-13));
  }

  SUBCASE("bounded by the loss range") {
    for (int rep = 0; rep < 50; ++rep) {
      std::vector<double> f(20);
      for (auto& v : f) v = rng.uniform(-100.0, 100.0);
      const auto gi = index_of_sizes({3, 8, 9});
      const double t = rng.uniform(-30.0, 30.0);
      const double tau = rng.uniform(-30.0, 30.0);
      const double j = hierarchical_value({t, tau}, f, gi);
      CHECK(j >= min_loss(f));
      CHECK(j <= max_loss(f));
    }
  }

  SUBCASE("tau -> 0 approaches the tau = 0 path") {
    std::vector<double> f(18);
    for (auto& v : f) v = rng.uniform(0.0, 5.0);
    const auto gi = index_of_sizes({5, 6, 7});
    const double a = hierarchical_value({2.0, 1e-8}, f, gi);
    const double b = hierarchical_value({2.0, 0.0}, f, gi);
    CHECK(std::abs(a - b) < 1e-6);
  }
}

TEST_CASE("hierarchical weights") {
  Rng rng(431);

  SUBCASE("t = tau equals the flat tilt weights") {
    std::vector<double> f(25);
    for (auto& v : f) v = rng.uniform(0.0, 3.0);
    const auto gi = index_of_sizes({10, 15});
    for (double t : {-1.5, 0.4, 2.0}) {
      const auto hw = hierarchical_weights({t, t}, f, gi);
      const auto fw = tilt_weights(t, f);
      for (std::size_t i = 0; i < f.size(); ++i)
        CHECK(std::abs(hw[i] - fw.w[i]) < 1e-12);
    }
  }

  SUBCASE("equal sizes and identical losses give uniform weights") {
    const std::vector<double> f(12, 0.7);
    const auto gi = index_of_sizes({4, 4, 4});
    const auto w = hierarchical_weights({3.0, -1.0}, f, gi);
    for (double v : w) CHECK(v == doctest::Approx(1.0 / 12.0).epsilon(1e-13));
  }

  SUBCASE("positive and normalized for arbitrary tilts") {
    for (int rep = 0; rep < 50; ++rep) {
      std::vector<double> f(21);
      for (auto& v : f) v = rng.uniform(0.0, 6.0);
      const auto gi = index_of_sizes({3, 7, 11});
      const HierTilt h{rng.uniform(-20.0, 20.0), rng.uniform(-20.0, 20.0)};
      const auto w = hierarchical_weights(h, f, gi);
      double sum = 0.0;
      for (double v : w) {
        CHECK(v >= 0.0);
        sum += v;
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("hierarchical gradient matches finite differences of the value") {
  Rng rng(433);
  const auto ds = grouped_linear(rng, 30, 3, 4);
  const auto fam = LossFamily::parse("squared");
  const auto gi = GroupIndex::build(ds);

  for (const HierTilt h : {HierTilt{1.2, 0.5}, HierTilt{-0.8, 0.3}, HierTilt{2.0, 0.0},
                           HierTilt{0.0, 1.0}, HierTilt{-2.0, -2.0}}) {
    std::vector<double> theta{0.3, -0.2, 0.5};
    const auto f = batch_losses(fam, theta, ds);
    const auto grads = batch_grads(fam, theta, ds);
    const auto g = hierarchical_gradient(h, f, grads, gi);

    const double eps = 1e-6;
    for (std::size_t j = 0; j < theta.size(); ++j) {
      auto up = theta, dn = theta;
      up[j] += eps;
      dn[j] -= eps;
      const double fd = (hierarchical_value(h, batch_losses(fam, up, ds), gi) -
                         hierarchical_value(h, batch_losses(fam, dn, ds), gi)) /
                        (2.0 * eps);
      CHECK(std::abs(g[j] - fd) / (1.0 + std::abs(g[j])) < 1e-5);
    }
  }
}

TEST_CASE("group sampling matches the softmax distribution") {
  const auto gi = index_of_sizes({2, 4, 8, 6});
  const std::vector<double> estimates{0.5, 1.25, 0.1, 2.0};
  const double t = -1.7;

  const auto p = group_sampling_probs(t, estimates, gi);
  double psum = 0.0;
  for (double v : p) psum += v;
  CHECK(psum == doctest::Approx(1.0).epsilon(1e-12));

  // frequencies over 1e5 draws within 1% of the probabilities
  Rng rng(7);
  std::vector<double> freq(4, 0.0);
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) freq[sample_group(t, estimates, gi, rng)] += 1.0;
  for (std::size_t g = 0; g < 4; ++g)
    CHECK(std::abs(freq[g] / draws - p[g]) < 0.01);

  // probabilities proportional to |g| e^{t estimate}
  for (std::size_t g = 0; g < 4; ++g) {
    const double raw = static_cast<double>(gi.group_size(g)) * std::exp(t * estimates[g]);
    CHECK(p[g] == doctest::Approx(raw / (2 * std::exp(t * 0.5) + 4 * std::exp(t * 1.25) +
                                         8 * std::exp(t * 0.1) + 6 * std::exp(t * 2.0)))
                      .epsilon(1e-12));
  }
}

TEST_CASE("batch hierarchical solve at t = tau tracks the flat solver") {
  Rng rng(443);
  const auto ds = grouped_linear(rng, 40, 3, 5);
  const auto fam = LossFamily::parse("squared");

  SolverConfig cfg;
  cfg.t = 1.1;
  cfg.step_size = 0.05;
  cfg.max_iters = 200;
  cfg.grad_tol = 0.0;

  const auto flat = batch_term_solve(ds, fam, {0.0, 0.0, 0.0}, cfg);
  const auto hier = batch_hierarchical_solve(ds, fam, {0.0, 0.0, 0.0}, {1.1, 1.1}, cfg);
  for (std::size_t j = 0; j < 3; ++j)
    CHECK(std::abs(hier.theta[j] - flat.theta[j]) < 1e-10);

  // t = tau = 0 is the plain ERM trajectory
  cfg.t = 0.0;
  const auto erm = batch_term_solve(ds, fam, {0.0, 0.0, 0.0}, cfg);
  const auto hier0 = batch_hierarchical_solve(ds, fam, {0.0, 0.0, 0.0}, {0.0, 0.0}, cfg);
  for (std::size_t j = 0; j < 3; ++j)
    CHECK(std::abs(hier0.theta[j] - erm.theta[j]) < 1e-10);
}

TEST_CASE("group-level positive tilt narrows the between-group loss gap") {
  // two groups drawn from different linear models; large t pushes toward
  // equalized group losses
  Rng rng(449);
  Dataset ds;
  ds.n = 200;
  ds.d = 2;
  ds.features.resize(ds.n * 2);
  ds.targets.resize(ds.n);
  ds.groups.resize(ds.n);
  for (std::size_t i = 0; i < ds.n; ++i) {
    const bool second = i >= 150;
    ds.features[i * 2] = rng.normal();
    ds.features[i * 2 + 1] = rng.normal();
    const double w0 = second ? -0.5 : 1.0;
    const double w1 = second ? 1.0 : 0.2;
    ds.targets[i] = w0 * ds.features[i * 2] + w1 * ds.features[i * 2 + 1] +
                    0.05 * rng.normal();
    ds.groups[i] = second ? 1 : 0;
  }
  const auto fam = LossFamily::parse("squared");
  const auto gi = GroupIndex::build(ds);

  SolverConfig cfg;
  cfg.step_size = 0.05;
  cfg.max_iters = 4000;
  cfg.grad_tol = 1e-10;

  auto group_gap = [&](const std::vector<double>& theta) {
    const auto r = group_tilted_losses(0.0, batch_losses(fam, theta, ds), gi);
    return std::abs(r[0] - r[1]);
  };

  const auto erm = batch_hierarchical_solve(ds, fam, {0.0, 0.0}, {0.0, 0.0}, cfg);
  cfg.step_size = 0.005;
  cfg.max_iters = 40000;
  const auto fair = batch_hierarchical_solve(ds, fam, {0.0, 0.0}, {50.0, 0.0}, cfg);
  CHECK(group_gap(fair.theta) < group_gap(erm.theta));
}

TEST_CASE("stochastic hierarchical solve") {
  Rng rng(457);
  const auto ds = grouped_linear(rng, 60, 2, 3);
  const auto fam = LossFamily::parse("squared");

  SUBCASE("single group behaves like the flat stochastic solver") {
    Dataset one = ds;
    std::fill(one.groups.begin(), one.groups.end(), 0);
    SolverConfig cfg;
    cfg.t = 1.0;
    cfg.step_size = 0.02;
    cfg.max_iters = 20000;
    cfg.grad_tol = 0.0;
    cfg.batch_size = 10;
    cfg.lambda = 0.5;
    cfg.seed = 21;
    cfg.trace_stride = 5000;
    cfg.hier_init_full_pass = true;

    const auto out = stochastic_hierarchical_solve(one, fam, {0.0, 0.0}, {1.0, 1.0}, cfg);

    SolverConfig ref_cfg;
    ref_cfg.t = 1.0;
    ref_cfg.step_size = 0.05;
    ref_cfg.max_iters = 100000;
    ref_cfg.grad_tol = 1e-10;
    const auto ref = batch_term_solve(one, fam, {0.0, 0.0}, ref_cfg);
    const double gap = tilted_value(1.0, batch_losses(fam, out.theta, one)) -
                       tilted_value(1.0, batch_losses(fam, ref.theta, one));
    CHECK(std::abs(gap) < 1e-2);
  }

  SUBCASE("fixed seed reproduces the run") {
    SolverConfig cfg;
    cfg.t = -1.0;
    cfg.step_size = 0.02;
    cfg.max_iters = 300;
    cfg.grad_tol = 0.0;
    cfg.batch_size = 5;
    cfg.seed = 8;
    const auto a = stochastic_hierarchical_solve(ds, fam, {0.0, 0.0}, {-1.0, 0.0}, cfg);
    const auto b = stochastic_hierarchical_solve(ds, fam, {0.0, 0.0}, {-1.0, 0.0}, cfg);
    CHECK(a.theta == b.theta);
  }

  SUBCASE("zero group-level tilt is rejected") {
    SolverConfig cfg;
    CHECK_THROWS_AS(stochastic_hierarchical_solve(ds, fam, {0.0, 0.0}, {0.0, 0.5}, cfg),
                    std::invalid_argument);
  }

  SUBCASE("missing groups are rejected") {
    Dataset plain = ds;
    plain.groups.clear();
    SolverConfig cfg;
    cfg.t = 1.0;
    CHECK_THROWS_AS(stochastic_hierarchical_solve(plain, fam, {0.0, 0.0}, {1.0, 0.0}, cfg),
                    std::invalid_argument);
  }
}
