#pragma once

// Dormand-Prince 5(4) with PI step control and Hairer's dense output.

#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace finsler {

struct OdeOptions {
  double rtol = 1e-9;
  double atol = 1e-11;
  double initial_step = 0.0;  // 0: automatic
  int max_steps = 200000;
  // Error control uses components [0, error_components) only; -1 means all.
  // Leaving variational components out makes them the exact derivative of
  // the discrete flow.
  int error_components = -1;
  // Times the integrator must land on exactly (within the span).
  std::vector<double> stop_times;
};

struct OdeStats {
  int accepted = 0;
  int rejected = 0;
  int evaluations = 0;
};

// Returns false when the right-hand side cannot be evaluated at y (the step
// is then rejected and retried smaller).
using OdeRhs = std::function<bool(double t, const double* y, double* dy)>;
// Returns false when y has left the admissible region; integration stops.
using OdeInside = std::function<bool(const double* y)>;

class OdeSolution {
 public:
  int dim() const { return dim_; }
  const std::vector<double>& times() const { return t_; }
  const std::vector<Eigen::VectorXd>& states() const { return y_; }
  double t_begin() const { return t_.front(); }
  double t_end() const { return t_.back(); }
  bool left_region() const { return left_region_; }
  const OdeStats& stats() const { return stats_; }

  // Dense-output state at t within the integrated span.
  Eigen::VectorXd operator()(double t) const;
  // Single component, cheaper.
  double component(double t, int i) const;

 private:
  friend OdeSolution dopri5(const OdeRhs&, const Eigen::VectorXd&, double, double, const OdeOptions&,
                            const OdeInside&);
  std::size_t locate(double t) const;

  int dim_ = 0;
  std::vector<double> t_;
  std::vector<Eigen::VectorXd> y_;
  // Per step: 5 * dim coefficients rcont1..rcont5.
  std::vector<std::vector<double>> dense_;
  bool left_region_ = false;
  OdeStats stats_;
};

// Integrates y' = f(t, y) from t0 to t1 (t1 < t0 allowed). Throws
// IntegrationError on step-size collapse or step budget exhaustion.
OdeSolution dopri5(const OdeRhs& f, const Eigen::VectorXd& y0, double t0, double t1, const OdeOptions& opt,
                   const OdeInside& inside = nullptr);

}  // namespace finsler
