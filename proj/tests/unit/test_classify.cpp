#include <doctest.h>

#include <cmath>

#include "finsler/classify.hpp"
#include "finsler/spray.hpp"
#include "finsler/transport.hpp"
#include "finsler/version.hpp"
#include "support/fixtures.hpp"
#include "support/util.hpp"

using namespace finsler;
using testutil::vec;

namespace {

Matrix random_matrix(Rng& rng, int n) {
  Matrix a(n, n);
  do {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) a(i, j) = rng.uniform(-1.0, 1.0);
  } while (std::fabs(a.determinant()) < 0.2);
  return a;
}

double rel_diff(const Matrix& a, const Matrix& b) { return (a - b).cwiseAbs().maxCoeff() / b.cwiseAbs().maxCoeff(); }

class Indefinite : public AuxMetricField {
 public:
  std::string name() const override { return "indefinite"; }
  Matrix g(const Vector&) const override { return Vector{{1.0, -1.0}}.asDiagonal(); }
  std::vector<Matrix> dg(const Vector&) const override { return {Matrix::Zero(2, 2), Matrix::Zero(2, 2)}; }
};

ClassifyConfig small_config() {
  ClassifyConfig c;
  c.seed = 3;
  c.berwald_samples = 40;
  c.preservation_geodesics = 10;
  c.preservation_vectors = 3;
  c.scan_samples = 50;
  c.busemann_pairs = 60;
  c.holonomy_loops = 6;
  c.kappa_samples = 10;
  return c;
}

}  // namespace

TEST_CASE("Binet-Legendre metric") {
  SUBCASE("Euclidean norm gives the identity") {
    for (int n : {2, 3}) {
      Metric m(families::euclidean(n));
      CHECK((binet_legendre_metric(m, Vector::Zero(n)) - Matrix::Identity(n, n)).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
  SUBCASE("|Av| gives A^T A") {
    Rng rng(31);
    for (int n : {2, 3}) {
      const Matrix a = random_matrix(rng, n);
      Metric m(families::linear_pullback(families::euclidean(n), a));
      CHECK(rel_diff(binet_legendre_metric(m, Vector::Zero(n)), a.transpose() * a) < 1e-6);
    }
  }
  SUBCASE("equivariance under 20 random linear maps") {
    Rng rng(32);
    Metric base(families::minkowski_quartic());
    const Matrix g0 = binet_legendre_metric(base, Vector::Zero(2));
    for (int k = 0; k < 20; ++k) {
      const Matrix a = random_matrix(rng, 2);
      Metric pulled(families::linear_pullback(families::minkowski_quartic(), a));
      CHECK(rel_diff(binet_legendre_metric(pulled, Vector::Zero(2)), a.transpose() * g0 * a) < 1e-4);
    }
  }
  SUBCASE("symmetric quartic norm is isotropic") {
    Metric m = fixtures::load("minkowski_quartic");
    const Matrix g = binet_legendre_metric(m, Vector::Zero(2));
    CHECK(std::fabs(g(0, 1)) < 1e-12);
    CHECK(g(0, 0) == doctest::Approx(g(1, 1)).epsilon(1e-12));
    Metric m3 = fixtures::load("berwald_product");
    CHECK(binet_legendre_metric(m3, Vector::Zero(3)).allFinite());
  }
  SUBCASE("errors") {
    Metric m4(families::euclidean(4));
    CHECK_THROWS_AS(binet_legendre_metric(m4, Vector::Zero(4)), InputError);
    Metric m = fixtures::load("randers_sine");
    CHECK_THROWS_AS(binet_legendre_metric(m, vec({0.1, 0.2}), 32, 1e-300), AccuracyError);
  }
}

TEST_CASE("kappa defect") {
  Rng rng(33);
  SUBCASE("riemannian aux = g") {
    for (const char* name : {"poincare", "sphere_chart"}) {
      Metric m = fixtures::load(name);
      const auto aux = riemannian_field(m);
      for (int s = 0; s < 10; ++s) {
        const auto [x, v] = testutil::probe(m, rng);
        CHECK(kappa_defect(m, *aux, x, v).norm < 1e-10);
      }
    }
    CHECK_THROWS_AS(riemannian_field(fixtures::load("randers_sine")), InputError);
  }
  SUBCASE("Binet-Legendre on the Berwald product") {
    Metric m = fixtures::load("berwald_product");
    const auto aux = binet_legendre_field(m);
    for (int s = 0; s < 5; ++s) {
      const auto [x, v] = testutil::probe(m, rng);
      CHECK(kappa_defect(m, *aux, x, Vector(v / m.norm(x, v))).transverse_norm <= 1e-5);
    }
  }
  SUBCASE("non-Berwald randers has a witness") {
    Metric m = fixtures::load("randers_sine");
    const auto aux = binet_legendre_field(m);
    double best = 0.0;
    for (int s = 0; s < 10; ++s) {
      const auto [x, v] = testutil::probe(m, rng);
      best = std::max(best, kappa_defect(m, *aux, x, Vector(v / m.norm(x, v))).norm);
    }
    CHECK(best >= 1e-3);
  }
  SUBCASE("2-homogeneity") {
    for (const char* name : {"randers_sine", "berwald_product", "poincare"}) {
      Metric m = fixtures::load(name);
      const auto aux = binet_legendre_field(m);
      const auto [x, v] = testutil::probe(m, rng);
      const Vector k1 = kappa_defect(m, *aux, x, v).kappa;
      const Vector k2 = kappa_defect(m, *aux, x, Vector(2.0 * v)).kappa;
      const double ref = 4.0 * (k1.norm() + 2.0 * spray_coefficients(m, x, v).G.norm());
      CHECK((k2 - 4.0 * k1).norm() <= 1e-9 * ref);
    }
  }
  SUBCASE("degenerate aux metric") {
    Metric m = fixtures::load("poincare");
    Indefinite aux;
    CHECK_THROWS_AS(kappa_defect(m, aux, vec({0, 0}), vec({1, 0})), InputError);
  }
}

TEST_CASE("norm preservation") {
  auto run = [](const char* name) {
    Metric m = fixtures::load(name);
    return norm_preservation_test(m, m.sampling_region(), 15, 3, 1.0, 41);
  };
  CHECK(run("minkowski_quartic").max_deviation <= 1e-10);
  CHECK(run("berwald_product").max_deviation <= 1e-6);
  CHECK(run("poincare").max_deviation <= 1e-6);
  const auto rs = run("randers_sine");
  CHECK(rs.max_deviation >= 1e-3);
  // the witness reproduces from its recorded inputs
  Metric m = fixtures::load("randers_sine");
  const auto f = parallel_transport(m, rs.witness.x, rs.witness.v, 1.0, {rs.witness.w});
  const double dev = std::fabs(m.norm(f.trace.x(rs.witness.t), f.column(0, rs.witness.t)) - m.norm(rs.witness.x, rs.witness.w)) /
                     m.norm(rs.witness.x, rs.witness.w);
  CHECK(dev == doctest::Approx(rs.max_deviation).epsilon(1e-6));
}

TEST_CASE("transport invariance of the aux metric") {
  {
    Metric m = fixtures::load("poincare");
    CHECK(transport_invariance_of_aux(m, *riemannian_field(m), m.sampling_region(), 10, 42).max_drift <= 1e-8);
  }
  {
    Metric m = fixtures::load("berwald_product");
    const auto rep = transport_invariance_of_aux(m, *binet_legendre_field(m), m.sampling_region(), 6, 43);
    CHECK(rep.max_drift <= 1e-6);
    CHECK(rep.max_kappa_along_v <= 1e-6);
  }
  {
    Metric m = fixtures::load("randers_sine");
    CHECK(transport_invariance_of_aux(m, *binet_legendre_field(m), m.sampling_region(), 6, 44).max_drift >= 1e-3);
  }
}

TEST_CASE("holonomy") {
  SUBCASE("flat quartic: identity") {
    Metric m = fixtures::load("minkowski_quartic");
    const auto h = holonomy_sample(m, vec({0, 0}), 10, 0.2, 51);
    CHECK(h.loops.size() == 10);
    CHECK(h.max_identity_deviation <= 1e-8);
  }
  SUBCASE("Poincare: g-orthogonal maps") {
    Metric m = fixtures::load("poincare");
    const Vector p = vec({0.05, -0.02});
    const auto h = holonomy_sample(m, p, 10, 0.2, 52);
    const Matrix g = fundamental_matrix(m, p, vec({1, 0}));
    for (const auto& l : h.loops) {
      CHECK(rel_diff(l.map.transpose() * g * l.map, g) <= 1e-6);
      CHECK(l.min_singular > 0.5);
    }
    CHECK(h.max_identity_deviation > 1e-4);  // curved: nontrivial holonomy
    CHECK(h.max_composition_error <= 1e-8);
  }
  SUBCASE("randers sine: an F-changing element") {
    Metric m = fixtures::load("randers_sine");
    const auto h = holonomy_sample(m, vec({0, 0}), 10, 0.3, 53);
    CHECK(h.max_f_deviation >= 1e-3);
    CHECK(h.max_composition_error <= 1e-8);
  }
  SUBCASE("errors") {
    Metric m = fixtures::load("poincare");
    CHECK_THROWS_AS(loop_map(m, {vec({0, 0}), vec({0.1, 0})}), InputError);
    CHECK_THROWS_AS(holonomy_sample(m, vec({5, 0}), 3, 0.1, 1), DomainError);
  }
}

TEST_CASE("Busemann convexity sampler") {
  SUBCASE("normed space: convex up to rounding") {
    Metric m = fixtures::load("minkowski_quartic");
    const auto rep = busemann_convexity_sample(m, m.sampling_region(), 60, 5, 1e-7, 61);
    CHECK_FALSE(rep.violated);
    CHECK(rep.worst_margin <= 1e-9);
  }
  SUBCASE("Poincare over seeds 1..10") {
    Metric m = fixtures::load("poincare");
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      const auto rep = busemann_convexity_sample(m, m.sampling_region(), 30, 5, 1e-7, seed);
      CHECK_FALSE(rep.violated);
      CHECK(rep.summary().rfind("no violation found at tolerance", 0) == 0);
    }
  }
  SUBCASE("sphere: positive witness") {
    Metric m = fixtures::load("sphere_chart");
    const auto rep = busemann_convexity_sample(m, m.sampling_region(), 30, 5, 1e-7, 62);
    CHECK(rep.violated);
    CHECK(rep.worst_margin >= 1e-3);
    const auto& w = rep.pairs[rep.witness];
    const auto& h = w.reverse ? w.h_reverse : w.h_forward;
    CHECK(h[(w.t1 + w.t2) / 2] - 0.5 * (h[w.t1] + h[w.t2]) == rep.worst_margin);
  }
  SUBCASE("deterministic") {
    Metric m = fixtures::load("randers_sine");
    const auto a = busemann_convexity_sample(m, m.sampling_region(), 20, 5, 1e-7, 63);
    const auto b = busemann_convexity_sample(m, m.sampling_region(), 20, 5, 1e-7, 63);
    REQUIRE(a.pairs.size() == b.pairs.size());
    for (std::size_t i = 0; i < a.pairs.size(); ++i) CHECK(a.pairs[i].h_forward == b.pairs[i].h_forward);
  }
  SUBCASE("bad arguments") {
    Metric m = fixtures::load("poincare");
    CHECK_THROWS_AS(busemann_convexity_sample(m, m.sampling_region(), 10, 2, 1e-7, 1), InputError);
    CHECK_THROWS_AS(busemann_convexity_sample(m, Region{vec({-2, -2}), vec({2, 2})}, 10, 5, 1e-7, 1), DomainError);
  }
}

TEST_CASE("convexity witness from a positive eigenvalue") {
  CHECK_FALSE(jacobi_convexity_witness(fixtures::load("minkowski_quartic"), vec({0, 0}), vec({1, 0})));
  CHECK_FALSE(jacobi_convexity_witness(fixtures::load("poincare"), vec({0.1, 0}), vec({0.2, 0.3})));
  Metric m = fixtures::load("sphere_chart");
  const auto w = jacobi_convexity_witness(m, vec({0.2, 0.1}), vec({0.3, -0.4}), 9);
  REQUIRE(w);
  CHECK(w->lambda == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(std::fabs(w->second_difference + m.norm(w->x, w->w)) <= 1e-4);
  CHECK(w->second_difference < 0.0);
}

TEST_CASE("classify config") {
  const ClassifyConfig c = small_config();
  const ClassifyConfig d = ClassifyConfig::from_json(c.to_json());
  CHECK(d.to_json() == c.to_json());
  CHECK_THROWS_AS(ClassifyConfig::from_json(nlohmann::json{{"bogus", 1}}), InputError);
  CHECK_THROWS_AS(ClassifyConfig::from_json(nlohmann::json{{"rtol", -1.0}}), InputError);
  CHECK_THROWS_AS(ClassifyConfig::from_json(nlohmann::json{{"busemann_pairs", 0}}), InputError);
  CHECK_THROWS_AS(ClassifyConfig::from_json(nlohmann::json::array()), InputError);
}

TEST_CASE("classification reports") {
  struct Expect {
    const char* name;
    bool berwald;
    std::optional<bool> nonpositive;  // unset: not asserted
    bool busemann;
  };
  for (const auto& e : {Expect{"berwald_product", true, true, true}, Expect{"poincare", true, true, true},
                        Expect{"minkowski_quartic", true, true, true}, Expect{"sphere_chart", true, false, false},
                        Expect{"randers_sine", false, std::nullopt, false}}) {
    Metric m = fixtures::load(e.name);
    const auto rep = classify_report(m, small_config());
    INFO(std::string(e.name));
    REQUIRE(rep.complete);
    CHECK(*rep.berwald == e.berwald);
    if (e.nonpositive) CHECK(*rep.flag_nonpositive == *e.nonpositive);
    CHECK(*rep.busemann_pass == e.busemann);
    CHECK(*rep.verdict_consistent);
    const auto j = rep.to_json();
    CHECK_FALSE(j.contains("timestamp"));
    CHECK(j["tool"]["version"] == kToolVersion);
    if (!e.berwald) CHECK(j["evidence"]["norm_preservation"]["max_deviation"].get<double>() >= 1e-3);
    if (!rep.flag_nonpositive.value()) CHECK(j["evidence"]["convexity_witness"].is_object());
    CHECK(classify_report(m, small_config()).to_json().dump() == j.dump());
  }
}
