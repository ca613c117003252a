#include "finsler/metric_io.hpp"

#include <fstream>
#include <sstream>

namespace finsler {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

ordered_json vec_json(const Vector& v) {
  ordered_json a = ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

ordered_json to_ordered(const json& j) { return ordered_json::parse(j.dump()); }

}  // namespace

ordered_json spec_to_json(const MetricSpec& spec) {
  const SymbolTable sym{spec.dimension};
  ordered_json j;
  if (!spec.name.empty()) j["name"] = spec.name;
  j["family"] = to_string(spec.family);
  j["dimension"] = spec.dimension;
  ordered_json p = ordered_json::object();
  std::visit(
      [&](const auto& params) {
        using P = std::decay_t<decltype(params)>;
        if constexpr (std::is_same_v<P, RiemannianParams>) {
          if (params.preset) {
            p["preset"] = to_string(*params.preset);
          } else {
            ordered_json g = ordered_json::array();
            for (const auto& row : params.g) {
              ordered_json r = ordered_json::array();
              for (const auto& e : row) r.push_back(to_ordered(expr_to_json(e, sym)));
              g.push_back(r);
            }
            p["g"] = g;
          }
        } else if constexpr (std::is_same_v<P, MinkowskiQuarticParams> || std::is_same_v<P, BerwaldProductParams>) {
          p["c"] = params.c;
        } else if constexpr (std::is_same_v<P, RandersParams>) {
          p["a"] = to_string(params.a);
          ordered_json b = ordered_json::array();
          for (const auto& e : params.b) b.push_back(to_ordered(expr_to_json(e, sym)));
          p["b"] = b;
        } else {
          p["f2"] = to_ordered(expr_to_json(params.f2, sym));
        }
      },
      spec.params);
  j["params"] = p;
  ordered_json c;
  c["lower"] = vec_json(spec.chart.lower);
  c["upper"] = vec_json(spec.chart.upper);
  c["margin"] = spec.chart.margin;
  c["probe_length"] = spec.chart.probe_length;
  j["chart_domain"] = c;
  return j;
}

namespace {

// Collects schema problems so that one error can report all of them.
struct Issues {
  std::vector<std::string> list;
  void add(const std::string& path, const std::string& what) { list.push_back(path + ": " + what); }
};

std::optional<Vector> read_vector(const json& j, const std::string& path, int n, Issues& issues) {
  if (!j.is_array()) {
    issues.add(path, "expected an array of numbers");
    return std::nullopt;
  }
  if (n > 0 && static_cast<int>(j.size()) != n) {
    issues.add(path, "expected " + std::to_string(n) + " entries, got " + std::to_string(j.size()));
    return std::nullopt;
  }
  Vector v(j.size());
  bool ok = true;
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) {
      issues.add(path + "[" + std::to_string(i) + "]", "expected a number");
      ok = false;
    } else {
      v[i] = j[i].get<double>();
    }
  }
  if (!ok) return std::nullopt;
  return v;
}

std::optional<double> read_number(const json& obj, const std::string& key, const std::string& path, Issues& issues,
                                  std::optional<double> fallback = std::nullopt) {
  if (!obj.contains(key)) {
    if (fallback) return fallback;
    issues.add(path + "." + key, "missing required field");
    return std::nullopt;
  }
  if (!obj[key].is_number()) {
    issues.add(path + "." + key, "expected a number");
    return std::nullopt;
  }
  return obj[key].get<double>();
}

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& path,
                Issues& issues) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : allowed) known = known || it.key() == k;
    if (!known) issues.add(path + "." + it.key(), "unknown field");
  }
}

std::optional<Expr> read_expr(const json& j, const SymbolTable& sym, const std::string& path, Issues& issues) {
  try {
    return expr_from_json(j, sym, path);
  } catch (const SchemaError& e) {
    issues.list.push_back(e.what());
    return std::nullopt;
  }
}

}  // namespace

MetricSpec spec_from_json(const json& j) {
  Issues issues;
  if (!j.is_object()) throw SchemaError("$: metric spec must be a JSON object");
  check_keys(j, {"name", "family", "dimension", "params", "chart_domain"}, "$", issues);

  MetricSpec s;
  if (j.contains("name")) {
    if (j["name"].is_string())
      s.name = j["name"].get<std::string>();
    else
      issues.add("$.name", "expected a string");
  }

  std::optional<Family> family;
  if (!j.contains("family")) {
    issues.add("$.family", "missing required field");
  } else if (!j["family"].is_string() || !(family = family_from_string(j["family"].get<std::string>()))) {
    issues.add("$.family",
               "expected one of riemannian, minkowski_quartic, randers, berwald_product, custom_expression");
  }

  int n = 0;
  if (!j.contains("dimension")) {
    issues.add("$.dimension", "missing required field");
  } else if (!j["dimension"].is_number_integer() || j["dimension"].get<int>() < 1 ||
             j["dimension"].get<int>() > kMaxDim) {
    issues.add("$.dimension", "expected an integer in [1, " + std::to_string(kMaxDim) + "]");
  } else {
    n = j["dimension"].get<int>();
  }
  s.dimension = n;

  if (!j.contains("chart_domain")) {
    issues.add("$.chart_domain", "missing required field");
  } else if (!j["chart_domain"].is_object()) {
    issues.add("$.chart_domain", "expected an object");
  } else {
    const json& c = j["chart_domain"];
    check_keys(c, {"lower", "upper", "margin", "probe_length"}, "$.chart_domain", issues);
    std::optional<Vector> lo, hi;
    if (c.contains("lower"))
      lo = read_vector(c["lower"], "$.chart_domain.lower", n, issues);
    else
      issues.add("$.chart_domain.lower", "missing required field");
    if (c.contains("upper"))
      hi = read_vector(c["upper"], "$.chart_domain.upper", n, issues);
    else
      issues.add("$.chart_domain.upper", "missing required field");
    const auto margin = read_number(c, "margin", "$.chart_domain", issues, 0.0);
    const auto probe = read_number(c, "probe_length", "$.chart_domain", issues, 0.5);
    if (lo && hi) {
      for (Eigen::Index i = 0; i < lo->size(); ++i)
        if (!((*lo)[i] < (*hi)[i]))
          issues.add("$.chart_domain", "lower[" + std::to_string(i) + "] must be below upper[" + std::to_string(i) + "]");
      s.chart.lower = *lo;
      s.chart.upper = *hi;
    }
    if (margin) {
      if (*margin < 0.0) issues.add("$.chart_domain.margin", "must be nonnegative");
      s.chart.margin = *margin;
    }
    if (probe) {
      if (!(*probe > 0.0)) issues.add("$.chart_domain.probe_length", "must be positive");
      s.chart.probe_length = *probe;
    }
    if (lo && hi && margin && *margin >= 0.0)
      for (Eigen::Index i = 0; i < lo->size(); ++i)
        if (!((*hi)[i] - (*lo)[i] > 2.0 * *margin))
          issues.add("$.chart_domain.margin", "leaves an empty sampling region along axis " + std::to_string(i));
  }

  const SymbolTable sym{n};
  if (!j.contains("params")) {
    issues.add("$.params", "missing required field");
  } else if (!j["params"].is_object()) {
    issues.add("$.params", "expected an object");
  } else if (family && n > 0) {
    const json& p = j["params"];
    s.family = *family;
    switch (*family) {
      case Family::riemannian: {
        check_keys(p, {"preset", "g"}, "$.params", issues);
        RiemannianParams rp;
        if (p.contains("preset") == p.contains("g")) {
          issues.add("$.params", "give exactly one of \"preset\" or \"g\"");
        } else if (p.contains("preset")) {
          std::optional<RiemannianPreset> preset;
          if (!p["preset"].is_string() || !(preset = riemannian_preset_from_string(p["preset"].get<std::string>())))
            issues.add("$.params.preset", "expected one of euclidean, poincare, sphere");
          else if (*preset != RiemannianPreset::euclidean && n != 2)
            issues.add("$.params.preset", "poincare and sphere presets are two-dimensional");
          rp.preset = preset;
        } else {
          rp.preset.reset();
          const json& g = p["g"];
          if (!g.is_array() || static_cast<int>(g.size()) != n) {
            issues.add("$.params.g", "expected an n x n array of expressions");
          } else {
            rp.g.assign(n, std::vector<Expr>(n));
            for (int r = 0; r < n; ++r) {
              const std::string rp_path = "$.params.g[" + std::to_string(r) + "]";
              if (!g[r].is_array() || static_cast<int>(g[r].size()) != n) {
                issues.add(rp_path, "expected " + std::to_string(n) + " entries");
                continue;
              }
              for (int c = 0; c < n; ++c) {
                auto e = read_expr(g[r][c], sym, rp_path + "[" + std::to_string(c) + "]", issues);
                if (e) {
                  if (e->max_variable() >= n)
                    issues.add(rp_path + "[" + std::to_string(c) + "]", "metric coefficients may depend on x only");
                  rp.g[r][c] = *e;
                }
              }
            }
            for (int r = 0; r < n; ++r)
              for (int c = r + 1; c < n; ++c)
                if (g[r].is_array() && g[c].is_array() && g[r].size() == g.size() && g[c].size() == g.size() &&
                    g[r][c] != g[c][r])
                  issues.add("$.params.g", "matrix must be symmetric (entries [" + std::to_string(r) + "][" +
                                               std::to_string(c) + "] and [" + std::to_string(c) + "][" +
                                               std::to_string(r) + "] differ)");
          }
        }
        s.params = rp;
        break;
      }
      case Family::minkowski_quartic:
      case Family::berwald_product: {
        check_keys(p, {"c"}, "$.params", issues);
        const auto c = read_number(p, "c", "$.params", issues, 1.0);
        if (c && !(*c > 0.0)) issues.add("$.params.c", "must be positive");
        if (*family == Family::berwald_product && n < 3)
          issues.add("$.dimension", "berwald_product needs dimension >= 3");
        if (*family == Family::minkowski_quartic)
          s.params = MinkowskiQuarticParams{c.value_or(1.0)};
        else
          s.params = BerwaldProductParams{c.value_or(1.0)};
        break;
      }
      case Family::randers: {
        check_keys(p, {"a", "b"}, "$.params", issues);
        RandersParams rp;
        if (p.contains("a")) {
          std::optional<RiemannianPreset> a;
          if (!p["a"].is_string() || !(a = riemannian_preset_from_string(p["a"].get<std::string>())))
            issues.add("$.params.a", "expected one of euclidean, poincare, sphere");
          else if (*a != RiemannianPreset::euclidean && n != 2)
            issues.add("$.params.a", "poincare and sphere presets are two-dimensional");
          else
            rp.a = *a;
        }
        if (!p.contains("b")) {
          issues.add("$.params.b", "missing required field");
        } else if (!p["b"].is_array() || static_cast<int>(p["b"].size()) != n) {
          issues.add("$.params.b", "expected " + std::to_string(n) + " expressions");
        } else {
          for (int i = 0; i < n; ++i) {
            const std::string path = "$.params.b[" + std::to_string(i) + "]";
            auto e = read_expr(p["b"][i], sym, path, issues);
            if (e && e->max_variable() >= n) issues.add(path, "one-form coefficients may depend on x only");
            rp.b.push_back(e.value_or(Expr::constant(0.0)));
          }
        }
        s.params = rp;
        break;
      }
      case Family::custom_expression: {
        check_keys(p, {"f2"}, "$.params", issues);
        if (!p.contains("f2")) {
          issues.add("$.params.f2", "missing required field");
        } else if (auto e = read_expr(p["f2"], sym, "$.params.f2", issues)) {
          s.params = CustomParams{*e};
        }
        break;
      }
    }
  }

  if (!issues.list.empty()) {
    std::string msg = "invalid metric spec:";
    for (const auto& i : issues.list) msg += "\n  " + i;
    throw SchemaError(msg);
  }
  return s;
}

MetricSpec load_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open metric spec file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    // byte offset -> line/column
    const std::size_t off = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    int line = 1, col = 1;
    for (std::size_t i = 0; i < off; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw InputError(path + ":" + std::to_string(line) + ":" + std::to_string(col) + ": JSON parse error");
  }
  return spec_from_json(j);
}

void save_spec(const MetricSpec& spec, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  out << spec_to_json(spec).dump(2) << "\n";
}

}  // namespace finsler
