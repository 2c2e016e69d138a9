#ifndef MRXI_CRITERIA_HPP
#define MRXI_CRITERIA_HPP

// A- and D-optimality of the design-conditional posterior covariance
//   Sigma(xi) = G - G K^T (K G K^T + N)^{-1} K G,   K = K(p(xi)),
// with analytic gradients and Hessians in the design angles.

#include "mrxi/forward.hpp"
#include "mrxi/gaussian.hpp"
#include "mrxi/grid.hpp"
#include "mrxi/objective.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/QR>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace mrxi {

enum class CriterionKind { A, D };

/// 0/1 diagonal of the weight matrix A (identity or a region-of-interest mask).
struct RoiWeight {
  Vector diag;

  static RoiWeight full(Eigen::Index n) { return {Vector::Ones(n)}; }

  /// Pixels with x < 0.
  static RoiWeight left_half(const std::vector<Vec2>& points) {
    RoiWeight w{Vector::Zero(static_cast<Eigen::Index>(points.size()))};
    for (std::size_t i = 0; i < points.size(); ++i)
      if (points[i].x() < 0.0) w.diag[static_cast<Eigen::Index>(i)] = 1.0;
    return w;
  }

  bool is_full() const { return (diag.array() == 1.0).all(); }

  void validate(Eigen::Index n) const {
    if (diag.size() != n) throw std::invalid_argument("RoiWeight: length does not match covariance");
    for (Eigen::Index i = 0; i < n; ++i)
      if (diag[i] != 0.0 && diag[i] != 1.0) throw std::invalid_argument("RoiWeight: entries must be 0 or 1");
    if (diag.sum() < 1.0) throw std::invalid_argument("RoiWeight: empty region of interest");
  }
};

/// tr(A cov A^T): sum of the flagged diagonal entries.
inline double psi_A(const Matrix& cov, const RoiWeight& weight) {
  weight.validate(cov.rows());
  return cov.diagonal().dot(weight.diag);
}

/// sqrt(|Omega| / N_c * psi_A), the expected L2 reconstruction error.
inline double expected_l2(double psi_a_value, double domain_area, Eigen::Index pixel_count) {
  if (psi_a_value < 0.0) throw std::invalid_argument("expected_l2: negative criterion value");
  return std::sqrt(domain_area / static_cast<double>(pixel_count) * psi_a_value);
}

inline double expected_l2(double psi_a_value, const PixelGrid& grid) {
  return expected_l2(psi_a_value, grid.domain_area(), static_cast<Eigen::Index>(grid.size()));
}

inline double log_det_spd(const Matrix& a) {
  const Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) throw NumericalError("log-determinant: matrix is not positive definite");
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

/// log det cov.
inline double psi_D(const Matrix& cov) { return log_det_spd(cov); }

/// ½ (log det prior - log det posterior).
inline double info_gain(const Matrix& prior_cov, const Matrix& post_cov) {
  return 0.5 * (log_det_spd(prior_cov) - log_det_spd(post_cov));
}

inline Matrix design_posterior_cov(const DesignAngles& design, const Matrix& base, const ForwardModel& model,
                                   const NoiseModel& noise) {
  const Matrix k = model.system_matrix(design);
  if (k.rows() == 0) return base;
  const Matrix y = base * k.transpose();
  Matrix s = k * y;
  s.diagonal().array() += noise.eta * noise.eta;
  const Eigen::LLT<Matrix> llt(s);
  if (llt.info() != Eigen::Success) throw NumericalError("design_posterior_cov: innovation matrix is not positive definite");
  Matrix sigma = base - y * llt.solve(y.transpose());
  symmetrize(sigma);
  return sigma;
}

/// Criterion of the posterior after the activations encoded in xi,
/// xi = (pos_1, dir_1, ..., pos_n, dir_n), starting from a fixed base covariance.
///
/// The A value is tr(W Sigma). The D value is reported relative to the base:
///   log det Sigma - log det G = log det N - log det (K G K^T + N),
/// which avoids factorizing G (often numerically singular for smooth priors) and
/// has the same derivatives as log det Sigma.
class DesignCriterion {
 public:
  DesignCriterion(ForwardModel model, Matrix base, NoiseModel noise, CriterionKind kind, RoiWeight weight)
      : model_(std::move(model)), base_(std::move(base)), noise_(noise), kind_(kind), weight_(std::move(weight)) {
    if (base_.rows() != model_.point_count() || base_.cols() != model_.point_count())
      throw std::invalid_argument("DesignCriterion: base covariance does not match the forward model");
    if (!(noise_.eta > 0.0)) throw std::invalid_argument("DesignCriterion: eta must be positive");
    weight_.validate(base_.rows());
    if (kind_ == CriterionKind::D && !weight_.is_full())
      throw std::invalid_argument("DesignCriterion: D-optimality supports the full-domain weight only");
    if (kind_ == CriterionKind::A) base_trace_ = base_.diagonal().dot(weight_.diag);
    // G = B B^T; tiny negative eigenvalues of a numerically singular G are dropped.
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(base_);
    if (eig.info() != Eigen::Success) throw NumericalError("DesignCriterion: eigendecomposition of the base failed");
    root_ = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  }

  CriterionKind kind() const { return kind_; }
  const Matrix& base() const { return base_; }
  const ForwardModel& model() const { return model_; }
  const NoiseModel& noise() const { return noise_; }
  const RoiWeight& weight() const { return weight_; }

  /// Criterion with no activation added.
  double base_value() const { return kind_ == CriterionKind::A ? base_trace_ : 0.0; }

  double value(const Vector& xi) const { return evaluate(xi, 0).value; }
  Evaluation operator()(const Vector& xi, int order) const { return evaluate(xi, order); }

  Evaluation evaluate(const Vector& xi, int order) const {
    if (xi.size() % 2 != 0) throw std::invalid_argument("DesignCriterion: odd number of design angles");
    if (order < 0 || order > 2) throw std::invalid_argument("DesignCriterion: order must be 0, 1 or 2");
    const DesignAngles design = from_vector(xi);
    const auto n_act = static_cast<Eigen::Index>(design.size());
    const Eigen::Index ns = model_.sensor_count();
    const Eigen::Index m = ns * n_act;
    const double var = noise_.eta * noise_.eta;

    Evaluation out;
    if (n_act == 0) {
      out.value = base_value();
      out.gradient.resize(0);
      out.hessian.resize(0, 0);
      return out;
    }

    std::vector<ActivationDerivatives> blocks;
    blocks.reserve(design.size());
    Matrix k(m, model_.point_count());
    for (Eigen::Index i = 0; i < n_act; ++i) {
      blocks.push_back(model_.derivatives(design[static_cast<std::size_t>(i)], order));
      k.middleRows(i * ns, ns) = blocks.back().value;
    }

    // With Z = K B, the QR factorization [Z^T; sqrt(var) I] = [Q1; Q2] R gives
    // S = K G K^T + var I = R^T R and Sigma = G - V^T V with V = Q1^T B^T.
    const Matrix z = k * root_;
    const Eigen::Index n = base_.rows();
    Matrix stacked(n + m, m);
    stacked.topRows(n) = z.transpose();
    stacked.bottomRows(m) = std::sqrt(var) * Matrix::Identity(m, m);
    const Eigen::HouseholderQR<Matrix> qr(stacked);
    const Matrix q1 = (qr.householderQ() * Matrix::Identity(n + m, m)).topRows(n);
    const Matrix r = qr.matrixQR().topRows(m).triangularView<Eigen::Upper>();
    const Matrix v = q1.transpose() * root_.transpose();

    if (kind_ == CriterionKind::A) {
      out.value = base_trace_ - v.cwiseAbs2().colwise().sum().dot(weight_.diag.transpose());
    } else {
      out.value = static_cast<double>(m) * std::log(var) - 2.0 * r.diagonal().cwiseAbs().array().log().sum();
    }
    if (!std::isfinite(out.value)) throw NumericalError("DesignCriterion: non-finite criterion value");
    if (order == 0) return out;

    // With N = var I, d Sigma = -Sigma (dK^T K + K^T dK) Sigma / var, so
    //   d psi_A = -(2 / var) <dK, K Sigma W Sigma>,   d psi_D = -(2 / var) <dK, K Sigma>.
    // K Sigma = var S^{-1} K G = var R^{-1} V avoids the cancellation in K (G - V^T V).
    Matrix sigma = base_ - v.transpose() * v;
    symmetrize(sigma);
    const auto upper = r.triangularView<Eigen::Upper>();
    const Matrix j = var * upper.solve(v);
    Matrix f, g;  // f = Sigma W Sigma; g = K f (A) or K Sigma (D)
    if (kind_ == CriterionKind::A) {
      f = sigma * weight_.diag.asDiagonal() * sigma;
      symmetrize(f);
      g = j * weight_.diag.asDiagonal() * sigma;
    } else {
      g = j;
    }

    const Eigen::Index nxi = 2 * n_act;
    auto first = [&](Eigen::Index a) -> const Matrix& {
      const auto& b = blocks[static_cast<std::size_t>(a / 2)];
      return a % 2 == 0 ? b.d_pos : b.d_dir;
    };
    out.gradient.resize(nxi);
    for (Eigen::Index a = 0; a < nxi; ++a)
      out.gradient[a] = -2.0 / var * first(a).cwiseProduct(g.middleRows((a / 2) * ns, ns)).sum();
    if (order == 1) return out;

    // Second order. For an angle a of activation alpha, dK_a = E_alpha A_a with A_a
    // the Ns x N derivative block and
    //   d_b d_a psi = -(2 / var) [ delta_{alpha beta} (<d_ab K, g> + <A_a h, A_b>)
    //                              - (1 / var) <A_b, (X_a)_beta> ],
    // h = f (A) or Sigma (D), J = K Sigma and
    //   X_a = J A_a^T J_alpha + (J K^T)_alpha A_a Sigma                        (D),
    //   X_a = g A_a^T J_alpha + J A_a^T g_alpha + (J K^T)_alpha A_a f + (g K^T)_alpha A_a Sigma   (A).
    // J K^T = var I - var^2 S^{-1}, g K^T = J W J^T.
    const Matrix r_inv = upper.solve(Matrix::Identity(m, m));
    Matrix jkt = -var * var * r_inv * r_inv.transpose();
    jkt.diagonal().array() += var;
    symmetrize(jkt);
    Matrix gkt;
    if (kind_ == CriterionKind::A) {
      gkt = j * weight_.diag.asDiagonal() * j.transpose();
      symmetrize(gkt);
    }
    const Matrix& h = kind_ == CriterionKind::A ? f : sigma;

    out.hessian.resize(nxi, nxi);
    for (Eigen::Index a = 0; a < nxi; ++a) {
      const Eigen::Index alpha = a / 2;
      const Matrix& da = first(a);
      const Matrix ah = da * h;
      Matrix x = jkt.middleCols(alpha * ns, ns) * ah;
      if (kind_ == CriterionKind::A) {
        x += (g * da.transpose()) * j.middleRows(alpha * ns, ns);
        x += (j * da.transpose()) * g.middleRows(alpha * ns, ns);
        x += gkt.middleCols(alpha * ns, ns) * (da * sigma);
      } else {
        x += (j * da.transpose()) * j.middleRows(alpha * ns, ns);
      }
      for (Eigen::Index b = 0; b <= a; ++b) {
        const Eigen::Index beta = b / 2;
        const Matrix& db = first(b);
        double t = -1.0 / var * db.cwiseProduct(x.middleRows(beta * ns, ns)).sum();
        if (alpha == beta) {
          const auto& blk = blocks[static_cast<std::size_t>(alpha)];
          const bool pa = a % 2 == 0, pb = b % 2 == 0;
          const Matrix& kab = (pa && pb) ? blk.d_pos_pos : (!pa && !pb) ? blk.d_dir_dir : blk.d_pos_dir;
          t += kab.cwiseProduct(g.middleRows(alpha * ns, ns)).sum();
          t += ah.cwiseProduct(db).sum();
        }
        out.hessian(a, b) = -2.0 / var * t;
        out.hessian(b, a) = out.hessian(a, b);
      }
    }
    return out;
  }

 private:
  ForwardModel model_;
  Matrix base_;
  NoiseModel noise_;
  CriterionKind kind_;
  RoiWeight weight_;
  Matrix root_;
  double base_trace_ = 0.0;
};

/// Value, gradient and Hessian of a single-activation criterion.
inline Evaluation criterion_derivatives(const Activation& xi, CriterionKind kind, const RoiWeight& weight,
                                            const Matrix& base, const ForwardModel& model, const NoiseModel& noise) {
  return DesignCriterion(model, base, noise, kind, weight).evaluate(to_vector({xi}), 2);
}

}  // namespace mrxi

#endif  // MRXI_CRITERIA_HPP
