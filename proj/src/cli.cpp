#include "finsler/cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "finsler/classify.hpp"
#include "finsler/curvature.hpp"
#include "finsler/geodesic.hpp"
#include "finsler/metric_io.hpp"
#include "finsler/spray.hpp"
#include "finsler/transport.hpp"
#include "finsler/version.hpp"

namespace finsler::cli {

namespace {

namespace fs = std::filesystem;

Vector parse_vector(const std::string& text, const std::string& flag, int dim) {
  std::vector<double> xs;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      xs.push_back(std::stod(item, &used));
      if (used != item.size() && item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument("");
    } catch (const std::exception&) {
      throw InputError(flag + ": cannot parse '" + item + "' as a number");
    }
  }
  if (static_cast<int>(xs.size()) != dim)
    throw InputError(flag + ": expected " + std::to_string(dim) + " comma-separated components, got " +
                     std::to_string(xs.size()));
  return Eigen::Map<Vector>(xs.data(), dim);
}

// "a,b;c,d" -> list of vectors
std::vector<Vector> parse_vectors(const std::string& text, const std::string& flag, int dim) {
  std::vector<Vector> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ';')) out.push_back(parse_vector(item, flag, dim));
  if (out.empty()) throw InputError(flag + ": no vectors given");
  return out;
}

std::string fmt(const Vector& v) {
  std::ostringstream s;
  s << std::setprecision(17);
  for (int i = 0; i < v.size(); ++i) s << (i ? "," : "") << v[i];
  return s.str();
}

struct Common {
  std::string metric_path;
  std::string out_dir;
  double rtol = 1e-9;
  double atol = 1e-11;
  std::uint64_t seed = 1;
};

void add_common(CLI::App* sub, Common& c, bool integrator, bool seed) {
  sub->add_option("--metric", c.metric_path, "Metric spec JSON file")->required();
  sub->add_option("--out", c.out_dir, std::string("Output directory (default: $") + kOutDirEnv + " or .)");
  if (integrator) {
    sub->add_option("--rtol", c.rtol, "Integrator relative tolerance")->check(CLI::PositiveNumber);
    sub->add_option("--atol", c.atol, "Integrator absolute tolerance")->check(CLI::PositiveNumber);
  }
  if (seed) sub->add_option("--seed", c.seed, "Master seed");
}

fs::path output_dir(const Common& c) {
  std::string dir = c.out_dir;
  if (dir.empty()) {
    const char* env = std::getenv(kOutDirEnv);
    dir = env && *env ? env : ".";
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw InputError("cannot create output directory " + dir);
  const fs::path probe = fs::path(dir) / ".finsler_write_probe";
  {
    std::ofstream f(probe);
    if (!f) throw InputError("output directory is not writable: " + dir);
  }
  fs::remove(probe, ec);
  return dir;
}

void write_json(const fs::path& path, const nlohmann::ordered_json& j) {
  std::ofstream f(path);
  if (!f) throw InputError("cannot write " + path.string());
  f << j.dump(2) << "\n";
}

IntegratorOptions integrator(const Common& c) {
  IntegratorOptions o;
  o.rtol = c.rtol;
  o.atol = c.atol;
  return o;
}

nlohmann::ordered_json vec_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Numerical laboratory for Finsler metrics on a coordinate chart", "finsler-lab"};
  app.set_version_flag("--version", std::string(kToolName) + " " + kToolVersion);
  app.require_subcommand(1);

  Common c;

  // validate
  int samples = 1000;
  auto* validate = app.add_subcommand("validate", "Check positivity, homogeneity and strong convexity");
  add_common(validate, c, false, true);
  validate->add_option("--samples", samples, "Random (x, v) samples")->check(CLI::PositiveNumber);

  // geodesic
  std::string x0s, v0s;
  double T = 1.0;
  bool normalize = false;
  auto* geodesic = app.add_subcommand("geodesic", "Integrate a geodesic and write its trace");
  add_common(geodesic, c, true, false);
  geodesic->add_option("--x0", x0s, "Initial point, comma separated")->required();
  geodesic->add_option("--v0", v0s, "Initial velocity, comma separated")->required();
  geodesic->add_option("--T", T, "Final time (may be negative)");
  geodesic->add_flag("--normalize", normalize, "Rescale v0 to F(x0, v0) = 1");

  // distance
  std::string ps, qs;
  auto* distance = app.add_subcommand("distance", "Forward distance d(p, q) by geodesic shooting");
  add_common(distance, c, true, false);
  distance->add_option("--p", ps, "Start point")->required();
  distance->add_option("--q", qs, "End point")->required();

  // transport
  std::string ws;
  auto* transport = app.add_subcommand("transport", "Linear parallel transport along a geodesic");
  add_common(transport, c, true, false);
  transport->add_option("--x0", x0s, "Initial point")->required();
  transport->add_option("--v0", v0s, "Initial velocity")->required();
  transport->add_option("--T", T, "Final time");
  transport->add_option("--w", ws, "Vectors to transport, 'a,b;c,d' (default: coordinate basis)");

  // curvature
  std::string xs, vs, cw;
  int scan = 0;
  double rel_tol = 1e-7;
  auto* curvature = app.add_subcommand("curvature", "Flag curvature, Jacobi spectrum, or a nonpositivity scan");
  add_common(curvature, c, false, true);
  curvature->add_option("--x", xs, "Point");
  curvature->add_option("--v", vs, "Flagpole");
  curvature->add_option("--w", cw, "Transverse vector (prints the flag curvature)");
  curvature->add_option("--scan", scan, "Scan this many random F-unit samples over the sampling region")
      ->check(CLI::PositiveNumber);
  curvature->add_option("--rel-tol", rel_tol, "Nonpositivity tolerance relative to F^2")->check(CLI::PositiveNumber);

  // classify
  std::string config_path;
  bool strict = false;
  int pairs = 0;
  bool dump_csv = false;
  auto* classify = app.add_subcommand("classify", "Run all rigidity tests and write a JSON report");
  add_common(classify, c, true, true);
  classify->add_option("--config", config_path, "JSON file overriding classify settings");
  classify->add_option("--pairs", pairs, "Busemann geodesic pairs")->check(CLI::PositiveNumber);
  classify->add_flag("--strict", strict, "Exit 1 when any verdict is negative");
  classify->add_flag("--dump-csv", dump_csv, "Also write the Busemann h(t) grids as CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    out << std::setprecision(17);
    const Metric metric(load_spec(c.metric_path));
    const int n = metric.dim();

    if (validate->parsed()) {
      const fs::path dir = output_dir(c);
      const ValidationReport rep = validate_spec(metric, samples, c.seed);
      nlohmann::ordered_json j;
      j["metric"] = metric.spec().name;
      j["passed"] = rep.passed;
      j["samples"] = rep.samples;
      j["seed"] = c.seed;
      j["issues"] = nlohmann::ordered_json::array();
      for (const auto& is : rep.issues)
        j["issues"].push_back({{"property", is.property}, {"x", vec_json(is.x)}, {"v", vec_json(is.v)}, {"detail", is.detail}});
      write_json(dir / "validate.json", j);
      if (rep.passed) {
        out << "valid: " << metric.spec().name << " (" << rep.samples << " samples)\n";
        return 0;
      }
      for (const auto& is : rep.issues)
        err << "invalid: " << is.property << " at x=(" << fmt(is.x) << ") v=(" << fmt(is.v) << "): " << is.detail << "\n";
      return 2;
    }

    if (geodesic->parsed()) {
      const Vector x0 = parse_vector(x0s, "--x0", n);
      Vector v0 = parse_vector(v0s, "--v0", n);
      if (normalize) v0 /= metric.norm(x0, v0);
      const fs::path dir = output_dir(c);
      const GeodesicTrace tr = integrate_geodesic(metric, x0, v0, T, integrator(c));
      tr.write_csv((dir / "geodesic.csv").string());
      out << "x(" << tr.t_end() << ") = " << fmt(tr.x(tr.t_end())) << "\n";
      out << "v(" << tr.t_end() << ") = " << fmt(tr.v(tr.t_end())) << "\n";
      out << "trace: " << (dir / "geodesic.csv").string() << "\n";
      if (tr.exited_chart()) {
        err << "geodesic leaves the chart before t = " << T << "; trace truncated at t = " << tr.t_end() << "\n";
        return 2;
      }
      return 0;
    }

    if (distance->parsed()) {
      const Vector p = parse_vector(ps, "--p", n), q = parse_vector(qs, "--q", n);
      const fs::path dir = output_dir(c);
      BvpOptions bo;
      bo.integrator = integrator(c);
      const DistanceResult d = local_distance(metric, p, q, bo);
      nlohmann::ordered_json j;
      j["p"] = vec_json(p);
      j["q"] = vec_json(q);
      j["distance"] = d.distance;
      j["v"] = vec_json(d.v);
      j["iterations"] = d.iterations;
      j["residual"] = d.residual;
      write_json(dir / "distance.json", j);
      out << d.distance << "\n";
      return 0;
    }

    if (transport->parsed()) {
      const Vector x0 = parse_vector(x0s, "--x0", n), v0 = parse_vector(v0s, "--v0", n);
      std::vector<Vector> w0;
      if (ws.empty())
        for (int k = 0; k < n; ++k) w0.push_back(Vector::Unit(n, k));
      else
        w0 = parse_vectors(ws, "--w", n);
      const fs::path dir = output_dir(c);
      const ParallelFrame f = parallel_transport(metric, x0, v0, T, w0, integrator(c));
      f.write_csv((dir / "transport.csv").string());
      const std::size_t last = f.times().size() - 1;
      for (int k = 0; k < f.size(); ++k) {
        double dev = 0.0;
        for (double h : f.norm_history[k]) dev = std::max(dev, std::fabs(h - f.norm_history[k][0]));
        out << "W" << k + 1 << "(" << f.times()[last] << ") = " << fmt(f.node_column(last, k))
            << "  max |F(W) - F(W0)| = " << dev << "\n";
      }
      if (f.trace.exited_chart()) {
        err << "geodesic leaves the chart; frame truncated at t = " << f.trace.t_end() << "\n";
        return 2;
      }
      return 0;
    }

    if (curvature->parsed()) {
      const fs::path dir = output_dir(c);
      if (scan > 0) {
        const ScanReport rep = nonpositivity_scan(metric, metric.sampling_region(), scan, c.seed, rel_tol);
        rep.write_csv((dir / "curvature_scan.csv").string());
        out << "max transverse eigenvalue: " << rep.max_eigenvalue << "\n";
        out << "verdict: " << (rep.nonpositive ? "nonpositive" : "positive") << "\n";
        if (rep.witness >= 0 && !rep.nonpositive) {
          const auto& s = rep.samples[rep.witness];
          out << "witness: x=(" << fmt(s.x) << ") v=(" << fmt(s.v) << ") seed=" << s.seed << "\n";
        }
        return 0;
      }
      if (xs.empty() || vs.empty()) throw InputError("curvature needs --x and --v, or --scan N");
      const Vector x = parse_vector(xs, "--x", n), v = parse_vector(vs, "--v", n);
      const JacobiSpectrum sp = jacobi_spectrum(metric, x, v, rel_tol);
      nlohmann::ordered_json j;
      j["x"] = vec_json(x);
      j["v"] = vec_json(v);
      j["eigenvalues"] = vec_json(sp.eigenvalues);
      j["nonpositive"] = sp.nonpositive;
      j["jacobi_operator"] = nlohmann::ordered_json::array();
      const Matrix r = berwald_curvature_operator(metric, x, v);
      for (int i = 0; i < n; ++i) j["jacobi_operator"].push_back(vec_json(r.row(i).transpose()));
      out << "eigenvalues: " << fmt(sp.eigenvalues) << "\n";
      out << "verdict: " << (sp.nonpositive ? "nonpositive" : "positive") << "\n";
      if (!cw.empty()) {
        const double k = flag_curvature(metric, x, v, parse_vector(cw, "--w", n));
        j["w"] = vec_json(parse_vector(cw, "--w", n));
        j["flag_curvature"] = k;
        out << "flag curvature: " << k << "\n";
      }
      write_json(dir / "curvature.json", j);
      return 0;
    }

    if (classify->parsed()) {
      ClassifyConfig cfg;
      if (!config_path.empty()) {
        std::ifstream f(config_path);
        if (!f) throw InputError("cannot read " + config_path);
        nlohmann::json j;
        try {
          j = nlohmann::json::parse(f);
        } catch (const nlohmann::json::parse_error& e) {
          throw InputError(config_path + ": JSON parse error: " + e.what());
        }
        cfg = ClassifyConfig::from_json(j);
      }
      if (classify->count("--seed")) cfg.seed = c.seed;
      if (classify->count("--rtol")) cfg.rtol = c.rtol;
      if (classify->count("--atol")) cfg.atol = c.atol;
      if (pairs > 0) cfg.busemann_pairs = pairs;
      const fs::path dir = output_dir(c);
      const ClassificationReport rep = classify_report(metric, cfg);
      write_json(dir / "classify_report.json", rep.to_json());
      if (dump_csv && rep.convexity) rep.convexity->write_csv((dir / "busemann_h.csv").string());
      const auto j = rep.to_json();
      out << "berwald: " << j["verdicts"]["berwald"].dump() << "\n";
      out << "flag_nonpositive: " << j["verdicts"]["flag_nonpositive"].dump() << "\n";
      out << "busemann_sampled: " << j["verdicts"]["busemann_sampled"].dump() << "\n";
      if (rep.convexity) out << rep.convexity->summary() << "\n";
      out << "report: " << (dir / "classify_report.json").string() << "\n";
      if (!rep.complete) {
        err << "report incomplete: stage " << rep.failed_stage << " failed: " << rep.failure << "\n";
        return 3;
      }
      return strict && !rep.verdict_ok() ? 1 : 0;
    }
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "numerical failure: " << e.what() << "\n";
    return 3;
  }
  return 2;
}

}  // namespace finsler::cli
