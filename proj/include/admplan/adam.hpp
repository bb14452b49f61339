#pragma once

#include <Eigen/Dense>

namespace admplan {

/// Adam over a flat parameter vector.
struct Adam {
  explicit Adam(Eigen::Index n, double lr_in = 1e-3)
      : lr(lr_in), m(Eigen::VectorXd::Zero(n)), v(Eigen::VectorXd::Zero(n)) {}

  void step(Eigen::Ref<Eigen::VectorXd> params, const Eigen::VectorXd& grad) {
    ++t;
    m = beta1 * m + (1.0 - beta1) * grad;
    v = beta2 * v + (1.0 - beta2) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(beta1, t);
    const double c2 = 1.0 - std::pow(beta2, t);
    params -= (lr / c1) * m.cwiseQuotient(((v / c2).cwiseSqrt().array() + eps).matrix());
  }

  double lr;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int t = 0;
  Eigen::VectorXd m, v;
};

}  // namespace admplan
