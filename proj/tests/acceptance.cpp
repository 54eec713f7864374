// Acceptance suite: one PASS/FAIL line per criterion, exit status 0 iff all pass.

#include "maeigen/io.hpp"
#include "support.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace maeigen;
using namespace maeigen::geometry;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;
};

std::string num(double x) {
  char b[32];
  std::snprintf(b, sizeof b, "%.3g", x);
  return b;
}

std::string fixed(double x, int digits = 8) {
  char b[48];
  std::snprintf(b, sizeof b, "%.*f", digits, x);
  return b;
}

double sup_diff(const NodeFunction& a, const NodeFunction& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s = std::max(s, std::abs(a[i] - b[i]));
  return s;
}

// A scheme run shared between criteria.
struct Run {
  std::string label;
  double h = 0.0;
  iteration::SchemeResult res;
};

struct Shared {
  fs::path scratch;
  std::vector<Run> runs;       // every acceptance run
  std::vector<std::size_t> rate_runs;  // runs of criteria 3 and 4
  double oracle_lambda = 0.0;
  MeshPtr disk16;
  std::size_t disk16_run = 0;
};

Run scheme_run(const std::string& label, const MeshPtr& mesh, double h, iteration::InitialData init,
               std::uint64_t seed) {
  iteration::SchemeConfig cfg;
  cfg.initial = std::move(init);
  return {label, h, iteration::run_scheme(mesh, cfg, seed)};
}

io::RunConfig disk_config(double h, const fs::path& out) {
  io::RunConfig c = io::parse_config(R"({"domain":{"ngon":[64,1.0]},"h":0.03125,"initial":{"kind":"cone"}})");
  c.h = h;
  c.out = out.string();
  return c;
}

// 1 ---------------------------------------------------------------------------
Verdict oracle_equivalence(Shared&) {
  const std::vector<MeshPtr> meshes{build_mesh(axis_square(1.0), 0.25),
                                    build_mesh(axis_square(1.0), 0.3),
                                    build_mesh(build_polygon({{0, 0}, {2, 0}, {1, 2}}), 0.4),
                                    build_mesh(regular_ngon(5, 1.0), 0.5),
                                    build_mesh(regular_ngon(7, 1.2), 0.55),
                                    build_mesh(axis_square(2.0, {-1, -1}), 0.5)};
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  int functions = 0;
  for (const auto& mesh : meshes) {
    if (mesh->num_interior() > 12) return {false, "mesh with more than 12 interior nodes"};
    for (int f = 0; f < 100; ++f, ++functions) {
      const NodeFunction u = f % 2 == 0 ? support::random_zero_boundary(mesh, rng) : support::random_bowl(mesh, rng);
      const auto mu = pl::ma_measure(u);
      const auto ref = support::brute_masses(u);
      for (std::size_t i = 0; i < ref.size(); ++i) worst = std::max(worst, std::abs(mu[i] - ref[i]));
    }
  }
  return {worst <= 1e-9, std::to_string(meshes.size()) + " meshes x 100 functions (" +
                             std::to_string(functions) + "), max node error " + num(worst)};
}

// 2 ---------------------------------------------------------------------------
Verdict self_consistency(Shared&) {
  const auto mesh = build_mesh(axis_square(1.0), 1.0 / 16);
  std::mt19937_64 rng(77);
  const dirichlet::SolverConfig cfg;
  double worst = 0.0;
  for (int s = 0; s < 50; ++s) {
    const NodeFunction v = s % 2 == 0 ? support::random_bowl(mesh, rng) : support::random_zero_boundary(mesh, rng);
    const auto u = dirichlet::solve_dirichlet(mesh, pl::ma_measure(v), cfg).u;
    worst = std::max(worst, sup_diff(u, v) / (10.0 * cfg.mass_tolerance * v.sup_norm()));
  }
  return {worst <= 1.0, "50 solves, worst error / (10 tol |v|) = " + num(worst)};
}

// 3 ---------------------------------------------------------------------------
Verdict disk_eigenvalue(Shared& sh) {
  sh.oracle_lambda = oracles::radial_eigen_oracle(1.0, 1e-10).lambda;
  std::ostringstream sink;
  io::Streams quiet{sink, sink};
  const auto fine = io::execute_run(disk_config(1.0 / 32, sh.scratch / "disk32_a"), quiet);
  if (!fine.result || fine.exit_code != io::kOk) return {false, "h = 1/32 run failed: " + fine.diagnostic};
  sh.disk16 = build_mesh(regular_ngon(64, 1.0), 1.0 / 16);
  Run coarse = scheme_run("disk h=1/16 cone", sh.disk16, 1.0 / 16, {iteration::InitialKind::Cone}, 0);
  const double g16 = std::abs(coarse.res.lambda_estimate - sh.oracle_lambda) / sh.oracle_lambda;
  const double g32 = std::abs(fine.result->lambda_estimate - sh.oracle_lambda) / sh.oracle_lambda;
  sh.runs.push_back({"disk h=1/32 cone", 1.0 / 32, *fine.result});
  sh.rate_runs.push_back(sh.runs.size() - 1);
  sh.runs.push_back(std::move(coarse));
  sh.disk16_run = sh.runs.size() - 1;
  return {g32 <= 0.03 && g32 < g16, "oracle " + fixed(sh.oracle_lambda) + ", h=1/16 " +
                                        fixed(sh.runs.back().res.lambda_estimate) + " (gap " + num(g16) +
                                        "), h=1/32 " + fixed(fine.result->lambda_estimate) + " (gap " + num(g32) + ")"};
}

// 4 ---------------------------------------------------------------------------
Verdict scaling_law(Shared& sh) {
  const double h = 1.0 / 32;
  Run one = scheme_run("[0,1]^2 h=1/32", build_mesh(axis_square(1.0), h), h, {iteration::InitialKind::Cone}, 0);
  Run two = scheme_run("[0,2]^2 h=1/16", build_mesh(axis_square(2.0), 2 * h), 2 * h, {iteration::InitialKind::Cone}, 0);
  const double ratio = one.res.lambda_estimate / two.res.lambda_estimate;
  sh.runs.push_back(std::move(one));
  sh.rate_runs.push_back(sh.runs.size() - 1);
  sh.runs.push_back(std::move(two));
  sh.rate_runs.push_back(sh.runs.size() - 1);
  return {std::abs(ratio / 16.0 - 1.0) <= 0.01, "lambda ratio " + fixed(ratio) + " (target 16)"};
}

// 8 (runs before 5-7 and 9 so its runs join "every acceptance run") -----------
Verdict initial_independence(Shared& sh) {
  const double h = 1.0 / 16;
  std::vector<Run> runs;
  runs.push_back(scheme_run("disk cone", sh.disk16, h, {iteration::InitialKind::Cone}, 0));
  runs.push_back(scheme_run("disk paraboloid", sh.disk16, h, {iteration::InitialKind::Paraboloid}, 0));
  runs.push_back(scheme_run("disk vanishing", sh.disk16, h, {iteration::InitialKind::VanishingAtPoint}, 0));
  for (std::uint64_t seed = 1; seed <= 5; ++seed)
    runs.push_back(scheme_run("disk max_affine seed " + std::to_string(seed), sh.disk16, h,
                              {iteration::InitialKind::MaxAffine, 4}, seed));
  double lo = runs[0].res.lambda_estimate, hi = lo, worst_sup = 0.0;
  const NodeFunction ref = scaled(runs[0].res.u_inf, 1.0 / runs[0].res.u_inf.sup_norm());
  for (const auto& r : runs) {
    lo = std::min(lo, r.res.lambda_estimate);
    hi = std::max(hi, r.res.lambda_estimate);
    worst_sup = std::max(worst_sup, sup_diff(scaled(r.res.u_inf, 1.0 / r.res.u_inf.sup_norm()), ref));
  }
  for (auto& r : runs) sh.runs.push_back(std::move(r));
  const double spread = (hi - lo) / lo;
  return {spread <= 1e-6 && worst_sup <= 5 * h,
          "8 initializations, lambda spread " + num(spread) + ", normalized sup gap " + num(worst_sup) +
              " (limit " + num(5 * h) + ")"};
}

// 5 ---------------------------------------------------------------------------
Verdict energy_monotone(Shared& sh) {
  double worst = 1.0;
  bool ok = true;
  for (const auto& r : sh.runs) {
    const auto c = oracles::check_energy_monotone(r.res.trace, 1e-9);
    ok = ok && c.passed;
    worst = std::min(worst, c.worst_margin);
  }
  return {ok && !sh.runs.empty(), std::to_string(sh.runs.size()) + " runs, worst relative drop " + num(worst)};
}

// 6 ---------------------------------------------------------------------------
Verdict pairing_monotone(Shared& sh) {
  double worst = 1.0;
  bool ok = true;
  for (const auto& r : sh.runs) {
    const auto c = oracles::check_pairing_monotone(r.res.trace, r.h);
    ok = ok && c.passed;
    worst = std::min(worst, c.worst_margin);
  }
  return {ok && !sh.runs.empty(), std::to_string(sh.runs.size()) + " runs, worst relative change " + num(worst)};
}

// 7 ---------------------------------------------------------------------------
Verdict rate_chain(Shared& sh) {
  double worst = 1.0;
  bool ok = sh.rate_runs.size() == 3;
  for (auto i : sh.rate_runs) {
    const auto& r = sh.runs[i];
    const auto c = oracles::check_rate_chain(r.res.trace, r.res.lambda_estimate, r.h);
    ok = ok && c.passed;
    worst = std::min(worst, c.worst_margin);
  }
  return {ok, std::to_string(sh.rate_runs.size()) + " runs (disk, both squares), worst margin " + num(worst)};
}

// 9 ---------------------------------------------------------------------------
Verdict inequality_suite(Shared& sh) {
  bool ok = true;
  std::size_t iterates = 0;
  double worst_alek = 1.0;
  for (const auto& r : sh.runs)
    for (std::size_t k = 1; k < r.res.iterates.size(); ++k) {
      const auto c = oracles::check_aleksandrov(r.res.iterates[k]);
      ok = ok && c.passed;
      worst_alek = std::min(worst_alek, c.worst_margin);
      ++iterates;
    }
  const auto& e = sh.runs[sh.disk16_run].res;
  const double h = 1.0 / 16;
  double worst_ra = 1.0, worst_nibp = 1.0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto u = oracles::random_smooth_convex(sh.disk16, 1000 + s);
    const auto v = oracles::random_smooth_convex(sh.disk16, 2000 + s);
    const auto ra = oracles::check_reverse_aleksandrov(u, e.u_inf, e.lambda_estimate, h);
    const auto nb = oracles::check_nibp(u, v, h);
    ok = ok && ra.passed && nb.passed;
    worst_ra = std::min(worst_ra, ra.worst_margin);
    worst_nibp = std::min(worst_nibp, nb.worst_margin);
  }
  const auto eq_ra = oracles::check_reverse_aleksandrov(e.u_inf, e.u_inf, e.lambda_estimate, h);
  const auto eq_nb = oracles::check_nibp(e.u_inf, e.u_inf, h);
  const double eq = std::max(std::abs(eq_ra.worst_margin), std::abs(eq_nb.worst_margin));
  ok = ok && eq_ra.passed && eq_nb.passed && eq <= h;
  return {ok, "Aleksandrov on " + std::to_string(iterates) + " iterates (worst " + num(worst_alek) +
                  "), 20 pairs: reverse Aleksandrov worst " + num(worst_ra) + ", NIBP worst " +
                  num(worst_nibp) + ", equality margin " + num(eq)};
}

// 10 --------------------------------------------------------------------------
Verdict krylov(Shared&) {
  const auto mesh = build_mesh(regular_ngon(64, 1.0), 1.0 / 8);
  double worst = 0.0;
  int checked = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto u = oracles::random_smooth_convex(mesh, 3000 + s);
    const auto v = oracles::random_smooth_convex(mesh, 4000 + s);
    for (double t : {0.25, 0.5, 0.75}) {
      try {
        const auto c = oracles::krylov_derivative_check(u, v, t, 1e-5);
        worst = std::max(worst, -c.worst_margin);
        ++checked;
      } catch (const Error& err) {
        return {false, std::string("pair ") + std::to_string(s) + ": " + err.what()};
      }
    }
  }
  return {checked == 60 && worst <= 1e-3, std::to_string(checked) + " evaluations, worst relative discrepancy " + num(worst)};
}

// 11 --------------------------------------------------------------------------
Verdict degenerate_inputs(Shared& sh) {
  std::vector<std::string> failures;
  io::RunConfig affine = io::parse_config(
      R"({"domain":{"square":1.0},"h":0.125,"initial":{"kind":"max_affine","affine_count":1}})");
  affine.out = (sh.scratch / "affine").string();
  std::ostringstream out, err;
  const int code = io::run_command(affine, {out, err});
  if (code != io::kInputError || err.str().find("zero Rayleigh quotient") == std::string::npos)
    failures.push_back("affine initial data gave exit " + std::to_string(code));

  const auto mesh = build_mesh(axis_square(1.0), 0.125);
  const auto zero = dirichlet::solve_dirichlet(mesh, {mesh, std::vector<double>(mesh->num_interior(), 0.0)});
  if (zero.u.sup_norm() != 0.0 || zero.report.sweeps_used != 0) failures.push_back("zero measure");

  try {
    iteration::step_with(NodeFunction::zeros(mesh), 0.0, {});
    failures.push_back("R = 0 step accepted");
  } catch (const Error& e) {
    if (e.code() != ErrorCode::ZeroRayleigh) failures.push_back("R = 0 step raised the wrong code");
  }
  try {
    build_polygon({{0, 0}, {2, 0}, {1, 0.2}, {1, 2}});
    failures.push_back("non-convex polygon accepted");
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NonConvexInput) failures.push_back("non-convex polygon raised the wrong code");
  }
  std::string detail = "affine exit 1 with diagnostic, zero measure gives zero, non-convex polygon rejected";
  if (!failures.empty()) {
    detail.clear();
    for (const auto& f : failures) detail += f + "; ";
  }
  return {failures.empty(), detail};
}

// 12 --------------------------------------------------------------------------
Verdict determinism(Shared& sh) {
  std::ostringstream sink;
  const auto again = io::execute_run(disk_config(1.0 / 32, sh.scratch / "disk32_b"), {sink, sink});
  if (again.exit_code != io::kOk) return {false, "repeat run failed: " + again.diagnostic};
  const auto a = io::read_file(sh.scratch / "disk32_a" / "trace.csv");
  const auto b = io::read_file(sh.scratch / "disk32_b" / "trace.csv");
  return {a == b && !a.empty(), "trace.csv " + std::to_string(a.size()) + " bytes, " +
                                    std::string(a == b ? "identical" : "different")};
}

}  // namespace

int main() {
  Shared sh;
  sh.scratch = fs::temp_directory_path() / "maeigen_acceptance";
  fs::remove_all(sh.scratch);
  fs::create_directories(sh.scratch);

  struct Criterion {
    int id;
    const char* name;
    Verdict (*fn)(Shared&);
  };
  // Criteria that reuse runs follow the criteria that produce them.
  const Criterion order[] = {{1, "MA-measure oracle equivalence", oracle_equivalence},
                             {2, "Dirichlet self-consistency", self_consistency},
                             {3, "Disk eigenvalue vs radial oracle", disk_eigenvalue},
                             {4, "Scaling law", scaling_law},
                             {8, "Initial-data independence", initial_independence},
                             {5, "Energy monotonicity", energy_monotone},
                             {6, "Pairing monotonicity", pairing_monotone},
                             {7, "Rate chain", rate_chain},
                             {9, "Inequality suite", inequality_suite},
                             {10, "Krylov identity", krylov},
                             {11, "Degenerate inputs", degenerate_inputs},
                             {12, "Determinism", determinism}};
  std::vector<std::pair<int, std::string>> lines;
  bool all = true;
  for (const auto& c : order) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.fn(sh);
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    all = all && v.pass;
    char head[96];
    std::snprintf(head, sizeof head, "[%s] %2d %s", v.pass ? "PASS" : "FAIL", c.id, c.name);
    lines.emplace_back(c.id, std::string(head) + ": " + v.detail + " (" + num(secs) + " s)");
    std::fprintf(stderr, "%s\n", lines.back().second.c_str());
  }
  std::sort(lines.begin(), lines.end());
  for (const auto& [id, line] : lines) std::printf("%s\n", line.c_str());
  std::printf("%s\n", all ? "ALL ACCEPTANCE CRITERIA PASSED" : "SOME ACCEPTANCE CRITERIA FAILED");
  fs::remove_all(sh.scratch);
  return all ? 0 : 1;
}
