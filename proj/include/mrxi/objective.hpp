#ifndef MRXI_OBJECTIVE_HPP
#define MRXI_OBJECTIVE_HPP

#include <Eigen/Dense>

#include <concepts>

namespace mrxi {

/// Value and, depending on the requested order, gradient and Hessian of a
/// scalar objective. Unrequested parts are left empty.
struct Evaluation {
  double value = 0.0;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;
};

template <class F>
concept Objective = requires(const F& f, const Eigen::VectorXd& x, int order) {
  { f(x, order) } -> std::convertible_to<Evaluation>;
};

}  // namespace mrxi

#endif  // MRXI_OBJECTIVE_HPP
