#include "finsler/jets.hpp"

#include <string>

namespace finsler {

namespace {

using J = Taylor<double, kMaxJetOrder>;

std::vector<double> directional(const Tape& f, const Eigen::VectorXd& base, const Eigen::VectorXd& dir, int order) {
  std::vector<J> z(base.size());
  for (Eigen::Index i = 0; i < base.size(); ++i) z[i] = J::variable(base[i], dir[i]);
  const J r = f.evaluate<J>(std::span<const J>(z.data(), z.size()));
  return std::vector<double>(r.c.begin(), r.c.begin() + order + 1);
}

void check(const Tape& f, const Eigen::VectorXd& base, int order) {
  if (order < 1 || order > kMaxJetOrder)
    throw InputError("jet order must be in [1, " + std::to_string(kMaxJetOrder) + "]");
  if (base.size() < f.num_vars()) throw InputError("jet base point has fewer entries than the expression needs");
}

}  // namespace

Jet jet_eval(const Tape& f, const Eigen::VectorXd& base, const std::vector<Eigen::VectorXd>& directions, int order) {
  check(f, base, order);
  Jet out;
  out.order = order;
  for (const auto& d : directions) {
    if (d.size() != base.size()) throw InputError("jet direction length does not match base point");
    out.coeffs.push_back(directional(f, base, d, order));
  }
  return out;
}

Jet jet_eval(const Expr& f, const Eigen::VectorXd& base, const std::vector<Eigen::VectorXd>& directions, int order) {
  return jet_eval(Tape(f, static_cast<int>(base.size())), base, directions, order);
}

double partials(const Tape& f, const Eigen::VectorXd& base, const std::vector<int>& multi_index) {
  if (static_cast<Eigen::Index>(multi_index.size()) != base.size())
    throw InputError("multi-index length must equal the number of variables");
  std::vector<Eigen::VectorXd> dirs;
  for (std::size_t i = 0; i < multi_index.size(); ++i) {
    if (multi_index[i] < 0) throw InputError("negative multi-index entry");
    for (int r = 0; r < multi_index[i]; ++r) dirs.push_back(Eigen::VectorXd::Unit(base.size(), i));
  }
  const int k = static_cast<int>(dirs.size());
  if (k == 0) {
    std::vector<double> z(base.data(), base.data() + base.size());
    return f(std::span<const double>(z.data(), z.size()));
  }
  check(f, base, k);
  return polarize(dirs, [&](const Eigen::VectorXd& u) { return directional(f, base, u, k)[k]; });
}

double partials(const Expr& f, const Eigen::VectorXd& base, const std::vector<int>& multi_index) {
  return partials(Tape(f, static_cast<int>(base.size())), base, multi_index);
}

}  // namespace finsler
