#include "maeigen/dirichlet.hpp"
#include "maeigen/iteration.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace maeigen;
using namespace maeigen::geometry;
using namespace maeigen::dirichlet;

namespace {

double sup_diff(const NodeFunction& a, const NodeFunction& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s = std::max(s, std::abs(a[i] - b[i]));
  return s;
}

DiscreteMeasure random_measure(const MeshPtr& mesh, std::mt19937_64& rng, double zero_prob = 0.0) {
  std::uniform_real_distribution<double> d(0.0, 1.0);
  DiscreteMeasure mu{mesh, std::vector<double>(mesh->num_interior())};
  for (auto& m : mu.mass) m = d(rng) < zero_prob ? 0.0 : mesh->weights[0] * (0.2 + d(rng));
  return mu;
}

}  // namespace

TEST(Dirichlet, ZeroMeasureGivesZero) {
  const auto mesh = build_mesh(axis_square(1.0), 0.125);
  const auto r = solve_dirichlet(mesh, {mesh, std::vector<double>(mesh->num_interior(), 0.0)});
  EXPECT_EQ(r.report.sweeps_used, 0);
  EXPECT_TRUE(r.report.converged);
  for (double v : r.u.values) EXPECT_EQ(v, 0.0);
}

TEST(Dirichlet, InputErrors) {
  const auto mesh = build_mesh(axis_square(1.0), 0.25);
  DiscreteMeasure mu{mesh, std::vector<double>(mesh->num_interior(), 0.1)};
  mu.mass[3] = -1e-3;
  try {
    solve_dirichlet(mesh, mu);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NegativeMass);
  }
  mu.mass[3] = std::numeric_limits<double>::infinity();
  try {
    solve_dirichlet(mesh, mu);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonFiniteMass);
  }
  SolverConfig bad;
  bad.mass_tolerance = 0.0;
  mu.mass[3] = 0.1;
  EXPECT_THROW(solve_dirichlet(mesh, mu, bad), Error);
}

TEST(Dirichlet, DiracOnDiskGivesCone) {
  for (double h : {1.0 / 8, 1.0 / 16}) {
    const auto mesh = build_mesh(regular_ngon(64, 1.0), h);
    DiscreteMeasure mu{mesh, std::vector<double>(mesh->num_interior(), 0.0)};
    std::size_t c = 0;
    for (std::size_t i = 0; i < mu.size(); ++i)
      if (norm(mesh->nodes[i]) < norm(mesh->nodes[c])) c = i;
    mu.mass[c] = std::numbers::pi;
    const auto r = solve_dirichlet(mesh, mu);
    ASSERT_TRUE(r.report.converged);
    double err = 0.0;
    for (std::size_t i = 0; i < mesh->num_nodes(); ++i)
      err = std::max(err, std::abs(r.u[i] - (norm(mesh->nodes[i]) - 1.0)));
    EXPECT_LE(err, 2 * h);
    const auto back = pl::ma_measure(r.u);
    for (std::size_t i = 0; i < mu.size(); ++i)
      EXPECT_NEAR(back[i], mu[i], 1e-8 * std::numbers::pi);
  }
}

TEST(Dirichlet, SelfConsistency) {
  std::mt19937_64 rng(101);
  const auto mesh = build_mesh(axis_square(1.0), 1.0 / 16);
  SolverConfig cfg;
  for (int s = 0; s < 6; ++s) {
    const auto v = (s % 2) ? support::random_bowl(mesh, rng) : support::random_zero_boundary(mesh, rng);
    const auto mu = pl::ma_measure(v);
    const auto r = solve_dirichlet(mesh, mu, cfg);
    ASSERT_TRUE(r.report.converged);
    EXPECT_LE(r.report.final_residual, cfg.mass_tolerance);
    EXPECT_LE(sup_diff(r.u, v), 10 * cfg.mass_tolerance * v.sup_norm()) << "seed " << s;
    EXPECT_TRUE(r.u.has_zero_boundary());
  }
}

TEST(Dirichlet, ResidualContract) {
  std::mt19937_64 rng(3);
  const auto mesh = build_mesh(regular_ngon(7, 1.0), 0.1);
  const auto mu = random_measure(mesh, rng, 0.2);
  const auto r = solve_dirichlet(mesh, mu);
  ASSERT_TRUE(r.report.converged);
  const auto back = pl::ma_measure(r.u);
  for (std::size_t i = 0; i < mu.size(); ++i)
    EXPECT_LE(std::abs(back[i] - mu[i]), 1e-8 * mu.total());
  for (std::size_t i = 0; i < mesh->num_interior(); ++i) EXPECT_LE(r.u[i], 0.0);
  // Convex: enveloping changes nothing.
  const auto env = pl::convex_envelope(NodeFunction(mesh, r.u.values));
  EXPECT_LE(sup_diff(env, r.u), 1e-14);
}

TEST(Dirichlet, ComparisonPrinciple) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  const auto mesh = build_mesh(axis_square(1.0), 1.0 / 8);
  for (int s = 0; s < 5; ++s) {
    const auto mu = random_measure(mesh, rng, 0.1);
    auto nu = mu;
    for (auto& m : nu.mass) m += d(rng) < 0.5 ? d(rng) * mesh->weights[0] : 0.0;
    const auto a = solve_dirichlet(mesh, mu), b = solve_dirichlet(mesh, nu);
    for (std::size_t i = 0; i < mesh->num_nodes(); ++i) EXPECT_GE(a.u[i], b.u[i] - 1e-9);
  }
}

TEST(Dirichlet, HalfPowerScaling) {
  std::mt19937_64 rng(8);
  const auto mesh = build_mesh(regular_ngon(6, 1.0), 0.1);
  const auto mu = random_measure(mesh, rng);
  const auto base = solve_dirichlet(mesh, mu);
  for (double c : {0.01, 4.0, 250.0}) {
    auto cmu = mu;
    for (auto& m : cmu.mass) m *= c;
    const auto r = solve_dirichlet(mesh, cmu);
    for (std::size_t i = 0; i < mesh->num_nodes(); ++i)
      EXPECT_NEAR(r.u[i], std::sqrt(c) * base.u[i], 1e-8 * std::sqrt(c) * base.u.sup_norm());
  }
}

TEST(Dirichlet, LoweringIsMonotoneAndAgreesWithNewton) {
  std::mt19937_64 rng(9);
  const auto mesh = build_mesh(axis_square(1.0), 0.2);
  const auto mu = random_measure(mesh, rng, 0.2);
  SolverConfig cfg;
  cfg.newton_acceleration = false;
  std::vector<double> prev(mesh->num_nodes(), 0.0);
  int sweeps = 0;
  cfg.sweep_observer = [&](int, std::span<const double> v) {
    ++sweeps;
    for (std::size_t i = 0; i < v.size(); ++i) EXPECT_LE(v[i], prev[i]);
    prev.assign(v.begin(), v.end());
  };
  const auto perron = solve_dirichlet(mesh, mu, cfg);
  ASSERT_TRUE(perron.report.converged);
  EXPECT_GT(sweeps, 1);
  EXPECT_EQ(perron.report.newton_steps, 0);
  const auto newton = solve_dirichlet(mesh, mu);
  EXPECT_LE(sup_diff(perron.u, newton.u), 1e-7 * newton.u.sup_norm());
}

TEST(Dirichlet, SweepBudgetExhaustion) {
  std::mt19937_64 rng(10);
  const auto mesh = build_mesh(axis_square(1.0), 0.2);
  SolverConfig cfg;
  cfg.newton_acceleration = false;
  cfg.max_sweeps = 1;
  try {
    solve_dirichlet(mesh, random_measure(mesh, rng), cfg);
    FAIL();
  } catch (const SolveFailure& e) {
    EXPECT_EQ(e.code(), ErrorCode::DidNotConverge);
    EXPECT_FALSE(e.report().converged);
    EXPECT_EQ(e.report().sweeps_used, 1);
  }
}

TEST(Dirichlet, AleksandrovBound) {
  std::mt19937_64 rng(12);
  const auto mesh = build_mesh(regular_ngon(5, 1.0), 0.1);
  const double diam = mesh->domain.diameter();
  for (int s = 0; s < 4; ++s) {
    const auto mu = random_measure(mesh, rng, 0.3);
    const auto r = solve_dirichlet(mesh, mu);
    for (std::size_t i = 0; i < mesh->num_interior(); ++i) {
      const double d = distance_to_boundary(mesh->domain, mesh->nodes[i]);
      EXPECT_LE(r.u[i] * r.u[i], diam * d * mu.total() * (1 + 1e-12));
    }
  }
}

TEST(Dirichlet, Deterministic) {
  std::mt19937_64 rng(14);
  const auto mesh = build_mesh(regular_ngon(64, 1.0), 1.0 / 16);
  const auto mu = random_measure(mesh, rng, 0.05);
  const auto a = solve_dirichlet(mesh, mu), b = solve_dirichlet(mesh, mu);
  EXPECT_EQ(a.u.values, b.u.values);
}

// The second scheme step from this max-affine start has a warm start whose
// Jacobian is singular; Newton must recover from the bowl start without lowering.
TEST(Dirichlet, DegenerateWarmStartFallsBackToBowl) {
  const auto mesh = build_mesh(regular_ngon(64, 1.0), 1.0 / 16);
  iteration::SchemeConfig cfg;
  cfg.initial = {iteration::InitialKind::MaxAffine, 4};
  const auto u1 = iteration::step(iteration::make_initial(mesh, cfg.initial, 3), cfg).u;
  const auto mu = iteration::scheme_measure(u1, functionals::rayleigh(u1));
  SolverConfig sc;
  sc.max_sweeps = 200;
  const auto r = solve_dirichlet(mesh, mu, sc, &u1);
  EXPECT_TRUE(r.report.converged);
  EXPECT_EQ(r.report.lowering_sweeps, 0);
  EXPECT_LE(r.report.final_residual, sc.mass_tolerance);
}
