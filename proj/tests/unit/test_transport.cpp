#include <doctest.h>

#include <cmath>
#include <fstream>
#include <string>

#include "finsler/spray.hpp"
#include "finsler/transport.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"
#include "support/util.hpp"

using namespace finsler;
using testutil::probe;
using testutil::vec;

namespace {
double g_inner(const Metric& m, const Vector& x, const Vector& a, const Vector& b) {
  return a.dot(oracle::riemannian_g(m, x) * b);
}
}  // namespace

TEST_CASE("transport on flat norms is the identity") {
  for (const char* name : {"euclidean", "minkowski_quartic"}) {
    Metric m = fixtures::load(name);
    const auto f = parallel_transport(m, vec({-0.2, 0.1}), vec({0.3, 0.2}), 1.0, {vec({1, 0}), vec({0.4, -2})});
    for (double t : {0.0, 0.3, 1.0}) {
      CHECK((f.column(0, t) - vec({1, 0})).norm() < 1e-15);
      CHECK((f.column(1, t) - vec({0.4, -2})).norm() < 1e-15);
    }
  }
}

TEST_CASE("Poincare transport preserves g inner products") {
  Metric m = fixtures::load("poincare");
  Rng rng(11);
  for (int s = 0; s < 20; ++s) {
    const auto [x0, v0] = probe(m, rng);
    const Vector a = rng.unit_vector(2), b = rng.unit_vector(2);
    const auto f = parallel_transport(m, x0, v0, 1.0, {a, b});
    if (f.trace.exited_chart()) continue;
    const double aa = g_inner(m, x0, a, a), ab = g_inner(m, x0, a, b), bb = g_inner(m, x0, b, b);
    for (std::size_t k = 0; k < f.times().size(); ++k) {
      const Vector x = f.trace.node_x(k);
      const Vector wa = f.node_column(k, 0), wb = f.node_column(k, 1);
      CHECK(std::fabs(g_inner(m, x, wa, wa) - aa) < 1e-8 * aa);
      CHECK(std::fabs(g_inner(m, x, wa, wb) - ab) < 1e-8 * std::sqrt(aa * bb));
      CHECK(std::fabs(g_inner(m, x, wb, wb) - bb) < 1e-8 * bb);
    }
  }
}

TEST_CASE("transport is linear and keeps the flagpole") {
  Rng rng(12);
  for (const auto& name : fixtures::all()) {
    Metric m = fixtures::load(name);
    const int n = m.dim();
    for (int s = 0; s < 5; ++s) {
      const auto [x0, v0] = probe(m, rng);
      const Vector u = rng.unit_vector(n), w = rng.unit_vector(n);
      const double al = 0.7, be = -1.3;
      const auto f = parallel_transport(m, x0, v0, 1.0, {u, w, Vector(al * u + be * w), v0});
      if (f.trace.exited_chart()) continue;
      for (std::size_t k = 0; k < f.times().size(); ++k) {
        const Vector comb = al * f.node_column(k, 0) + be * f.node_column(k, 1);
        CHECK((f.node_column(k, 2) - comb).norm() <= 1e-10 * std::max(1.0, comb.norm()));
        CHECK((f.node_column(k, 3) - f.trace.node_v(k)).norm() <= 1e-8 * v0.norm());
      }
    }
  }
}

TEST_CASE("covariant derivative") {
  SUBCASE("flagpole is parallel") {
    Metric m = fixtures::load("randers_sine");
    const auto tr = integrate_geodesic(m, vec({0.1, -0.2}), vec({0.4, 0.3}), 1.0);
    FieldAlong w;
    w.value = [&](double t) { return tr.v(t); };
    for (const auto& d : covariant_derivative(m, tr, w)) CHECK(d.norm() < 1e-7);
  }
  SUBCASE("flat: D W = W'") {
    Metric m = fixtures::load("minkowski_quartic");
    const auto tr = integrate_geodesic(m, vec({0, 0}), vec({0.5, 0.1}), 1.0);
    FieldAlong w;
    w.value = [](double t) { return vec({t * t, std::sin(t)}); };
    w.derivative = [](double t) { return vec({2 * t, std::cos(t)}); };
    const auto d = covariant_derivative(m, tr, w);
    for (std::size_t k = 0; k < d.size(); ++k) {
      const double t = tr.times()[k];
      CHECK((d[k] - vec({2 * t, std::cos(t)})).norm() < 1e-14);
    }
  }
  SUBCASE("Poincare constant field vs Christoffel oracle") {
    Metric m = fixtures::load("poincare");
    const auto tr = integrate_geodesic(m, vec({0, 0}), vec({0.3, 0.2}), 1.0);
    FieldAlong w;
    w.value = [](double) { return vec({1, 0}); };
    const auto d = covariant_derivative(m, tr, w);
    for (std::size_t k = 0; k < d.size(); ++k) {
      const auto gam = oracle::christoffel(m, tr.node_x(k));
      const Vector v = tr.node_v(k);
      Vector expect(2);
      for (int i = 0; i < 2; ++i) expect[i] = v.dot(gam[i].col(0));
      CHECK((d[k] - expect).norm() < 1e-6);
    }
  }
  SUBCASE("node samples") {
    Metric m = fixtures::load("poincare");
    const auto f = parallel_transport(m, vec({0.1, 0}), vec({0.2, 0.3}), 1.0, {vec({1, 1})});
    FieldAlong w;
    for (std::size_t k = 0; k < f.times().size(); ++k) w.node_values.push_back(f.node_column(k, 0));
    for (const auto& d : covariant_derivative(m, f.trace, w)) CHECK(d.norm() < 1e-4);
    w.node_values.pop_back();
    CHECK_THROWS_AS(covariant_derivative(m, f.trace, w), InputError);
  }
}

TEST_CASE("Jacobi fields by variation") {
  SUBCASE("flat: J = t w") {
    for (const char* name : {"euclidean", "minkowski_quartic"}) {
      Metric m = fixtures::load(name);
      const auto j = jacobi_by_variation(m, vec({0, 0}), vec({0.3, 0.1}), vec({-0.2, 0.5}), 1.0);
      for (std::size_t k = 0; k < j.t.size(); ++k) CHECK((j.J[k] - j.t[k] * vec({-0.2, 0.5})).norm() < 1e-15);
    }
  }
  SUBCASE("Poincare radial: |J|_g = sinh t") {
    Metric m = fixtures::load("poincare");
    const auto j = jacobi_by_variation(m, vec({0, 0}), vec({0.5, 0}), vec({0, 0.5}), 1.5);
    REQUIRE_FALSE(j.trace.exited_chart());
    for (std::size_t k = 0; k < j.t.size(); ++k) {
      const double len = std::sqrt(g_inner(m, j.trace.node_x(k), j.J[k], j.J[k]));
      CHECK(len == doctest::Approx(std::sinh(j.t[k])).epsilon(1e-8));
    }
    CHECK(j.J_at(1.5)[1] > 0.0);
  }
  SUBCASE("Jacobi equation residual") {
    Rng rng(13);
    for (const auto& name : fixtures::all()) {
      Metric m = fixtures::load(name);
      const auto [x0, v0] = probe(m, rng);
      const auto j = jacobi_by_variation(m, x0, v0, rng.unit_vector(m.dim()), 1.0);
      CHECK(jacobi_residual(m, j.trace, 0) < 1e-9);
    }
  }
}

TEST_CASE("Jacobi fields by the Jacobi equation") {
  Metric m = fixtures::load("poincare");
  const Vector x0 = vec({0.1, -0.1}), v0 = vec({0.3, 0.2});
  const auto tr = integrate_geodesic(m, x0, v0, 1.0);
  SUBCASE("zero data") {
    const auto j = jacobi_by_ode(m, tr, Vector::Zero(2), Vector::Zero(2));
    for (const auto& jj : j.J) CHECK(jj.norm() == 0.0);
  }
  SUBCASE("flagpole field t gamma'") {
    const auto j = jacobi_by_ode(m, tr, Vector::Zero(2), v0);
    for (std::size_t k = 0; k < j.t.size(); ++k) CHECK((j.J[k] - j.t[k] * j.trace.node_v(k)).norm() < 1e-9);
  }
  SUBCASE("cross-oracle on every fixture") {
    Rng rng(14);
    for (const auto& name : fixtures::all()) {
      Metric fm = fixtures::load(name);
      for (int s = 0; s < 3; ++s) {
        const auto [x, v] = probe(fm, rng);
        const Vector j0 = rng.unit_vector(fm.dim()), dj0 = rng.unit_vector(fm.dim());
        const auto a = jacobi_field(fm, x, v, j0, dj0, 1.0);
        if (a.trace.exited_chart()) continue;
        const auto b = jacobi_by_ode(fm, a.trace, j0, dj0);
        for (double t : {0.25, 0.5, 0.75, 1.0}) {
          INFO(name << " t=" << t);
          CHECK((a.J_at(t) - b.J_at(t)).norm() < 1e-7);
          CHECK((a.DJ_at(t) - b.DJ_at(t)).norm() < 1e-7);
        }
      }
    }
  }
}

TEST_CASE("curvature reconstruction from Jacobi fields") {
  Rng rng(15);
  for (const auto& name : fixtures::all()) {
    Metric m = fixtures::load(name);
    for (int s = 0; s < 3; ++s) {
      const auto [x, v] = probe(m, rng);
      const auto [rh, rf] = reconstruct_curvature(m, x, v, 0.5);
      INFO(name);
      CHECK((rh - rf).cwiseAbs().maxCoeff() < 1e-6 * std::max(1.0, rf.cwiseAbs().maxCoeff()));
    }
  }
}

TEST_CASE("small-time expansion") {
  SUBCASE("flat quartic is exact") {
    Metric m = fixtures::load("minkowski_quartic");
    const auto fit = small_time_expansion_check(m, vec({0, 0}), vec({0.5, 0.2}), vec({0.1, 0.3}));
    CHECK(fit.exact);
  }
  SUBCASE("curved fixtures show third order") {
    Rng rng(16);
    for (const char* name : {"poincare", "berwald_product", "sphere_chart", "randers_sine"}) {
      Metric m = fixtures::load(name);
      const auto [x, v] = probe(m, rng);
      const auto fit = small_time_expansion_check(m, x, v, rng.unit_vector(m.dim()));
      INFO(name << " slope " << fit.slope);
      CHECK((fit.exact || fit.slope >= 2.8));
    }
  }
  SUBCASE("bad input") {
    Metric m = fixtures::load("poincare");
    CHECK_THROWS_AS(small_time_expansion_check(m, vec({0, 0}), vec({0.5, 0}), vec({0, 0})), InputError);
  }
}

TEST_CASE("osculating cross-check") {
  SUBCASE("riemannian fixtures") {
    for (const char* name : {"poincare", "sphere_chart"}) {
      Metric m = fixtures::load(name);
      const auto tr = integrate_geodesic(m, vec({0.05, -0.1}), vec({0.3, 0.25}), 1.0);
      const auto c = osculating_cross_check(m, tr, 4);
      INFO(name << " " << c.max_discrepancy);
      CHECK(c.max_discrepancy <= 1e-9);
    }
  }
  SUBCASE("Finsler fixtures") {
    for (const char* name : {"minkowski_quartic", "randers_const", "randers_sine", "berwald_product"}) {
      Metric m = fixtures::load(name);
      Rng rng(17);
      const auto [x, v] = probe(m, rng);
      const auto tr = integrate_geodesic(m, x, v, 1.0);
      const auto c = osculating_cross_check(m, tr, 3);
      INFO(name << " " << c.max_discrepancy);
      CHECK(c.max_discrepancy <= 1e-5);
    }
  }
}

TEST_CASE("frame CSV export") {
  Metric m = fixtures::load("poincare");
  const auto f = parallel_transport(m, vec({0, 0}), vec({0.5, 0}), 1.0, {vec({1, 0}), vec({0, 1})});
  const std::string path = "frame_test.csv";
  f.write_csv(path);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "t,W1_1,W1_2,W2_1,W2_2,F_W1,F_W2");
  std::string first;
  std::getline(in, first);
  CHECK(first == "0,1,0,0,1,2,2");
}
