// Acceptance runner: one PASS/FAIL line per criterion.
//
//   acceptance                 run all criteria
//   acceptance 3 5             run selected criteria
//   --report-dir DIR           where criterion 12 stores its reports and
//                              criterion 14 looks for them

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "finsler/classify.hpp"
#include "finsler/curvature.hpp"
#include "finsler/sampling.hpp"
#include "finsler/spray.hpp"
#include "finsler/transport.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"
#include "support/util.hpp"

using namespace finsler;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string sci(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", x);
  return buf;
}

// Collects sub-checks into one outcome line.
struct Tally {
  bool pass = true;
  std::vector<std::string> parts;
  void add(bool ok, const std::string& what) {
    pass = pass && ok;
    parts.push_back(what + (ok ? "" : " [FAILED]"));
  }
  Outcome done() const {
    std::string s;
    for (std::size_t i = 0; i < parts.size(); ++i) s += (i ? "; " : "") + parts[i];
    return {pass, s};
  }
};

const std::vector<std::string> kBerwaldFixtures{"euclidean", "poincare", "sphere_chart", "minkowski_quartic",
                                                "berwald_product"};
const std::vector<std::string> kVerdictFixtures{"minkowski_quartic", "poincare", "berwald_product", "sphere_chart",
                                                "randers_sine"};

Outcome check_fundamental_tensor() {
  double worst = 0.0;
  for (const auto& name : fixtures::all()) {
    Metric m = fixtures::load(name);
    Rng rng(101);
    for (int s = 0; s < 100; ++s) {
      const auto [x, v] = testutil::probe(m, rng);
      const Matrix g = fundamental_matrix(m, x, v);
      const Matrix fd = oracle::fundamental(m, x, v);
      worst = std::max(worst, (g - fd).cwiseAbs().maxCoeff() / fd.cwiseAbs().maxCoeff());
    }
  }
  return {worst < 1e-6, "max relative error " + sci(worst) + " (tol 1e-6) over 100 samples x 7 fixtures"};
}

Outcome check_constant_speed() {
  double worst = 0.0;
  int skipped = 0;
  for (const auto& name : fixtures::all()) {
    Metric m = fixtures::load(name);
    Rng rng(102);
    for (int s = 0; s < 100; ++s) {
      const auto [x, v] = testutil::probe(m, rng);
      const GeodesicTrace tr = integrate_geodesic(m, x, v, 1.0);
      if (tr.exited_chart()) {
        ++skipped;
        continue;
      }
      const double f0 = m.norm(x, v);
      for (std::size_t k = 0; k < tr.times().size(); ++k)
        worst = std::max(worst, std::fabs(m.norm_unchecked(tr.node_x(k).data(), tr.node_v(k).data()) - f0) / f0);
    }
  }
  return {worst < 1e-8 && skipped == 0,
          "max relative speed drift " + sci(worst) + " (tol 1e-8), T = 1, rtol 1e-9, 100 geodesics x 7 fixtures, " +
              std::to_string(skipped) + " left the chart"};
}

Outcome check_constant_curvature() {
  Tally t;
  for (const auto& [name, k] : {std::pair<const char*, double>{"poincare", -1.0}, {"sphere_chart", 1.0}}) {
    Metric m = fixtures::load(name);
    Rng rng(103);
    double worst = 0.0;
    for (int s = 0; s < 50; ++s) {
      const auto [x, v] = testutil::probe(m, rng);
      worst = std::max(worst, std::fabs(flag_curvature(m, x, v, rng.unit_vector(2)) - k));
    }
    t.add(worst <= 1e-5, std::string(name) + " |K - (" + std::to_string(static_cast<int>(k)) + ")| <= " + sci(worst));
  }
  return t.done();
}

Outcome check_expansion_order() {
  Tally t;
  for (const char* name : {"poincare", "berwald_product"}) {
    Metric m = fixtures::load(name);
    Rng rng(104);
    double lo = 1e9;
    bool exact = false;
    for (int s = 0; s < 5; ++s) {
      const auto [x, v] = testutil::probe(m, rng);
      const auto fit = small_time_expansion_check(m, x, v, rng.unit_vector(m.dim()));
      if (fit.exact)
        exact = true;
      else
        lo = std::min(lo, fit.slope);
    }
    t.add(exact || lo >= 2.8, std::string(name) + " min slope " + std::to_string(lo));
  }
  for (const char* name : {"euclidean", "minkowski_quartic", "randers_const"}) {
    Metric m = fixtures::load(name);
    Rng rng(105);
    const auto [x, v] = testutil::probe(m, rng);
    const auto fit = small_time_expansion_check(m, x, v, rng.unit_vector(m.dim()));
    t.add(fit.exact, std::string(name) + (fit.exact ? " exact" : " not flagged exact"));
  }
  return t.done();
}

Outcome check_osculating() {
  double worst = 0.0;
  for (const auto& name : fixtures::all()) {
    Metric m = fixtures::load(name);
    Rng rng(106);
    for (int s = 0; s < 3; ++s) {
      const auto [x, v] = testutil::probe(m, rng);
      const GeodesicTrace tr = integrate_geodesic(m, x, v, 1.0);
      worst = std::max(worst, osculating_cross_check(m, tr, 4).max_discrepancy);
    }
  }
  return {worst < 1e-5, "max discrepancy " + sci(worst) + " (tol 1e-5) over 7 fixtures x 3 geodesics x 4 times"};
}

Outcome check_jacobi_cross() {
  double jmax = 0.0, rmax = 0.0;
  for (const auto& name : fixtures::all()) {
    Metric m = fixtures::load(name);
    Rng rng(107);
    for (int s = 0; s < 5; ++s) {
      const auto [x, v] = testutil::probe(m, rng);
      const Vector j0 = rng.unit_vector(m.dim()), dj0 = rng.unit_vector(m.dim());
      const auto a = jacobi_field(m, x, v, j0, dj0, 1.0);
      const auto b = jacobi_by_ode(m, a.trace, j0, dj0);
      for (double t = 0.0; t <= 1.0; t += 0.05) jmax = std::max(jmax, (a.J_at(t) - b.J_at(t)).norm());
      const auto [rh, rf] = reconstruct_curvature(m, x, v, 0.5);
      rmax = std::max(rmax, (rh - rf).cwiseAbs().maxCoeff() / std::max(1.0, rf.cwiseAbs().maxCoeff()));
    }
  }
  Tally t;
  t.add(jmax < 1e-7, "variation vs Jacobi-equation fields " + sci(jmax) + " (tol 1e-7)");
  t.add(rmax < 1e-6, "reconstructed R vs formula " + sci(rmax) + " (tol 1e-6)");
  return t.done();
}

Outcome check_berwald_detection() {
  Tally t;
  for (const auto& name : kBerwaldFixtures) {
    Metric m = fixtures::load(name);
    Rng rng(108);
    double worst = 0.0;
    bool ok = true;
    for (int s = 0; s < 200; ++s) {
      const auto [x, v] = testutil::probe(m, rng);
      const SprayData d = spray_coefficients(m, x, v);
      ok = ok && d.berwald_norm <= 1e-7 * d.scale + 1e-14;
      worst = std::max(worst, d.berwald_norm / std::max(d.scale, 1e-300));
    }
    t.add(ok, name + " norm/scale <= " + sci(worst));
  }
  Metric m = fixtures::load("randers_sine");
  Rng rng(109);
  double best = 0.0;
  for (int s = 0; s < 200; ++s) {
    const auto [x, v] = testutil::probe(m, rng);
    const SprayData d = spray_coefficients(m, x, v);
    best = std::max(best, d.berwald_norm / d.scale);
  }
  t.add(best >= 1e-2, "randers_sine witness norm/scale " + sci(best) + " (>= 1e-2)");
  return t.done();
}

Outcome check_norm_preservation() {
  Tally t;
  for (const auto& name : kBerwaldFixtures) {
    Metric m = fixtures::load(name);
    const auto rep = norm_preservation_test(m, m.sampling_region(), 100, 5, 1.0, 110);
    t.add(rep.max_deviation <= 1e-6 && rep.skipped == 0, name + " " + sci(rep.max_deviation));
  }
  Metric m = fixtures::load("randers_sine");
  const auto rep = norm_preservation_test(m, m.sampling_region(), 100, 5, 1.0, 111);
  t.add(rep.max_deviation >= 1e-3, "randers_sine witness " + sci(rep.max_deviation) + " (>= 1e-3)");
  return t.done();
}

Outcome check_canonical_metric() {
  Tally t;
  Metric e(families::euclidean(2));
  const double id = (binet_legendre_metric(e, Vector::Zero(2)) - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff();
  t.add(id <= 1e-6, "Euclidean -> identity " + sci(id));
  Rng rng(112);
  Metric base(families::minkowski_quartic());
  const Matrix g0 = binet_legendre_metric(base, Vector::Zero(2));
  double eq = 0.0;
  for (int k = 0; k < 20; ++k) {
    Matrix a(2, 2);
    do {
      for (int i = 0; i < 4; ++i) a(i / 2, i % 2) = rng.uniform(-1.0, 1.0);
    } while (std::fabs(a.determinant()) < 0.2);
    Metric pulled(families::linear_pullback(families::minkowski_quartic(), a));
    const Matrix expect = a.transpose() * g0 * a;
    eq = std::max(eq, (binet_legendre_metric(pulled, Vector::Zero(2)) - expect).cwiseAbs().maxCoeff() /
                          expect.cwiseAbs().maxCoeff());
  }
  t.add(eq <= 1e-4, "equivariance over 20 maps " + sci(eq));
  Metric bp = fixtures::load("berwald_product");
  const auto rep = transport_invariance_of_aux(bp, *binet_legendre_field(bp), bp.sampling_region(), 20, 113);
  t.add(rep.max_drift <= 1e-6, "berwald_product transport drift " + sci(rep.max_drift));
  return t.done();
}

Outcome check_kappa() {
  Tally t;
  for (const auto& name : kBerwaldFixtures) {
    Metric m = fixtures::load(name);
    const auto aux = binet_legendre_field(m);
    Rng rng(114);
    double worst = 0.0;
    for (int s = 0; s < 20; ++s) {
      auto [x, v] = testutil::probe(m, rng);
      worst = std::max(worst, kappa_defect(m, *aux, x, Vector(v / m.norm(x, v))).transverse_norm);
    }
    t.add(worst <= 1e-5, name + " " + sci(worst));
  }
  Metric m = fixtures::load("randers_sine");
  const auto aux = binet_legendre_field(m);
  Rng rng(115);
  double best = 0.0, homog = 0.0;
  for (int s = 0; s < 20; ++s) {
    auto [x, v] = testutil::probe(m, rng);
    v /= m.norm(x, v);
    const auto k1 = kappa_defect(m, *aux, x, v);
    best = std::max(best, k1.transverse_norm);
    const Vector k2 = kappa_defect(m, *aux, x, Vector(2.0 * v)).kappa;
    homog = std::max(homog, (k2 - 4.0 * k1.kappa).norm() / (4.0 * k1.kappa.norm()));
  }
  t.add(best >= 1e-3, "randers_sine witness " + sci(best) + " (>= 1e-3)");
  t.add(homog <= 1e-9, "kappa(2v) = 4 kappa(v) to " + sci(homog));
  return t.done();
}

Outcome check_holonomy() {
  Tally t;
  {
    Metric m = fixtures::load("minkowski_quartic");
    const auto h = holonomy_sample(m, Vector::Zero(2), 50, 0.25, 116);
    t.add(h.max_identity_deviation <= 1e-8 && h.loops.size() == 50,
          "minkowski_quartic |M - I| " + sci(h.max_identity_deviation) + " over " + std::to_string(h.loops.size()) + " loops");
  }
  {
    Metric m = fixtures::load("poincare");
    const Vector p = Vector::Zero(2);
    const auto h = holonomy_sample(m, p, 50, 0.175, 117);
    const Matrix g = fundamental_matrix(m, p, Vector::Unit(2, 0));
    double worst = 0.0;
    for (const auto& l : h.loops)
      worst = std::max(worst, (l.map.transpose() * g * l.map - g).cwiseAbs().maxCoeff() / g.cwiseAbs().maxCoeff());
    t.add(worst <= 1e-6 && h.loops.size() >= 45, "poincare |M^T g M - g| " + sci(worst));
    t.add(h.max_composition_error <= 1e-8, "nested-loop composition " + sci(h.max_composition_error));
  }
  {
    Metric m = fixtures::load("randers_sine");
    const auto h = holonomy_sample(m, Vector::Zero(2), 50, 0.3, 118);
    t.add(h.max_f_deviation >= 1e-3, "randers_sine F change " + sci(h.max_f_deviation) + " (>= 1e-3)");
  }
  return t.done();
}

// The criterion-12 reports, concatenated in fixture order.
std::string verdict_reports(std::vector<ClassificationReport>* out) {
  ClassifyConfig cfg;
  cfg.seed = 2024;
  nlohmann::ordered_json all = nlohmann::ordered_json::object();
  for (const auto& name : kVerdictFixtures) {
    Metric m = fixtures::load(name);
    ClassificationReport rep = classify_report(m, cfg);
    all[name] = rep.to_json();
    if (out) out->push_back(std::move(rep));
  }
  return all.dump(2) + "\n";
}

fs::path g_report_dir = ".";

Outcome check_busemann_end_to_end() {
  std::vector<ClassificationReport> reps;
  const std::string text = verdict_reports(&reps);
  std::ofstream(g_report_dir / "verdict_reports.json") << text;
  Tally t;
  for (const auto& r : reps) {
    const std::string name = r.spec.name;
    if (!r.complete) {
      t.add(false, name + " incomplete at " + r.failed_stage);
      continue;
    }
    const auto& c = *r.convexity;
    const bool both = c.both_orders && c.n_pairs == 10000;
    if (name == "sphere_chart")
      t.add(both && c.worst_margin >= 1e-3, name + " witness margin " + sci(c.worst_margin));
    else if (name != "randers_sine")
      t.add(both && c.worst_margin <= 1e-7, name + " worst margin " + sci(c.worst_margin) + " over " +
                                                 std::to_string(c.evaluated) + " pairs");
    const bool lhs = *r.berwald && *r.flag_nonpositive;
    t.add(lhs == *r.busemann_pass, name + " (" + (*r.berwald ? "B" : "b") + (*r.flag_nonpositive ? "N" : "n") +
                                       (*r.busemann_pass ? "C" : "c") + ")");
  }
  return t.done();
}

Outcome check_convexity_witness() {
  Metric m = fixtures::load("sphere_chart");
  Rng rng(119);
  double worst = 0.0;
  for (int s = 0; s < 5; ++s) {
    const auto [x, v] = testutil::probe(m, rng);
    const auto w = jacobi_convexity_witness(m, x, v, s);
    if (!w) return {false, "no positive eigenvalue found"};
    worst = std::max(worst, std::fabs(w->second_difference - w->expected));
  }
  return {worst <= 1e-4, "|second difference + lambda F(w)| <= " + sci(worst) + " (tol 1e-4) at 5 flags"};
}

Outcome check_determinism() {
  const fs::path prior = g_report_dir / "verdict_reports.json";
  std::string first;
  if (fs::exists(prior)) {
    std::ifstream in(prior);
    first.assign(std::istreambuf_iterator<char>(in), {});
  } else {
    first = verdict_reports(nullptr);
  }
  const std::string second = verdict_reports(nullptr);
  return {first == second, std::string(first == second ? "byte-identical" : "reports differ") + " (" +
                               std::to_string(second.size()) + " bytes, " +
                               (fs::exists(prior) ? "compared with the stored run" : "two in-process runs") + ")"};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "fundamental tensor vs finite differences", check_fundamental_tensor},
      {2, "geodesic constant speed", check_constant_speed},
      {3, "constant-curvature flag values", check_constant_curvature},
      {4, "Jacobi field small-time expansion order", check_expansion_order},
      {5, "osculating extension vs connection derivative", check_osculating},
      {6, "Jacobi cross-oracle and curvature reconstruction", check_jacobi_cross},
      {7, "Berwald detection", check_berwald_detection},
      {8, "transport norm preservation", check_norm_preservation},
      {9, "Binet-Legendre metric", check_canonical_metric},
      {10, "kappa defect", check_kappa},
      {11, "linear holonomy", check_holonomy},
      {12, "Busemann sampling and verdict consistency", check_busemann_end_to_end},
      {13, "convexity witness from a positive eigenvalue", check_convexity_witness},
      {14, "report determinism", check_determinism},
  };
  std::vector<int> chosen;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--report-dir" && i + 1 < argc) {
      g_report_dir = argv[++i];
      fs::create_directories(g_report_dir);
    } else {
      chosen.push_back(std::stoi(a));
    }
  }
  bool ok = true;
  for (const auto& c : all) {
    if (!chosen.empty() && std::find(chosen.begin(), chosen.end(), c.id) == chosen.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    char head[96];
    std::snprintf(head, sizeof head, "%s %2d %s", o.pass ? "PASS" : "FAIL", c.id, c.name);
    std::cout << head << ": " << o.detail << " [" << std::fixed << std::setprecision(1) << secs << " s]\n"
              << std::defaultfloat << std::flush;
    ok = ok && o.pass;
  }
  return ok ? 0 : 1;
}
