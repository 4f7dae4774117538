#include "defrad/cpd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <Eigen/Cholesky>

#include "defrad/errors.hpp"

namespace defrad::cpd {

namespace {

constexpr double kDim = 3.0;

double log_add_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

// Squared distances d_mn = ||x_n - t_m||^2 (M x N), computed about the
// centroid of X to limit cancellation.
constexpr double kLogTiny = 575.0;  // exp(-575) ~ 1e-250
constexpr double kTiny = 1e-250;

Matrix squared_distances(const MatrixX3& X, const MatrixX3& T) {
  const Eigen::RowVector3d c = X.colwise().mean();
  const MatrixX3 Xc = X.rowwise() - c;
  const MatrixX3 Tc = T.rowwise() - c;
  Matrix d = -2.0 * (Tc * Xc.transpose());
  d.colwise() += Tc.rowwise().squaredNorm();
  d.rowwise() += Xc.rowwise().squaredNorm().transpose();
  return d.cwiseMax(0.0);
}

struct EStepOutput {
  Matrix P;
  double nll_data = 0.0;  // -sum_n log p(x_n)
};

EStepOutput e_step_impl(const MatrixX3& X, const MatrixX3& T, double sigma2,
                        double w, bool want_posterior) {
  const auto M = T.rows();
  const auto N = X.rows();
  Matrix E = squared_distances(X, T) * (-0.5 / sigma2);

  const double log_norm = std::log(2.0 * std::numbers::pi * sigma2) * (kDim / 2.0);
  const double log_c =
      w > 0.0 ? std::log(static_cast<double>(M) * w /
                         (static_cast<double>(N) * (1.0 - w))) + log_norm
              : -std::numeric_limits<double>::infinity();
  const double log_mix = std::log((1.0 - w) / static_cast<double>(M)) - log_norm;

  EStepOutput out;
  for (Eigen::Index n = 0; n < N; ++n) {
    auto col = E.col(n);
    const double mx = col.maxCoeff();
    // Negligible terms are flushed to zero: subnormals make the later
    // products an order of magnitude slower.
    col = (col.array() - mx < -kLogTiny).select(0.0, (col.array() - mx).exp()).matrix();
    const double s = col.sum();
    const double log_den = log_add_exp(mx + std::log(s), log_c);
    out.nll_data -= log_mix + log_den;
    if (want_posterior) {
      col *= std::exp(mx - log_den);
      col = (col.array() < kTiny).select(0.0, col.array()).matrix();
    }
  }
  if (want_posterior) out.P = std::move(E);
  return out;
}

double penalty(double lambda_reg, const Matrix& G, const MatrixX3& W) {
  if (lambda_reg == 0.0 || W.rows() == 0) return 0.0;
  return 0.5 * lambda_reg * (W.transpose() * (G * W)).trace();
}

}  // namespace

void CpdParams::validate() const {
  if (!(beta > 0.0)) throw InvalidArgument("cpd: beta must be > 0");
  if (!(lambda_reg >= 0.0)) throw InvalidArgument("cpd: lambda_reg must be >= 0");
  if (!(outlier_w >= 0.0 && outlier_w < 1.0))
    throw InvalidArgument("cpd: outlier_w must lie in [0, 1)");
  if (!(tol > 0.0)) throw InvalidArgument("cpd: tol must be > 0");
  if (max_iters < 1) throw InvalidArgument("cpd: max_iters must be >= 1");
  if (!(sigma2_floor > 0.0)) throw InvalidArgument("cpd: sigma2_floor must be > 0");
}

MatrixX3 to_matrix(std::span<const Point3> points) {
  MatrixX3 m(static_cast<Eigen::Index>(points.size()), 3);
  for (std::size_t i = 0; i < points.size(); ++i)
    m.row(static_cast<Eigen::Index>(i)) = points[i].transpose();
  return m;
}

std::vector<Point3> to_points(const MatrixX3& m) {
  std::vector<Point3> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) out[i] = m.row(i).transpose();
  return out;
}

double init_sigma2(const PointCloudFrame& X, const PointCloudFrame& Y) {
  if (X.empty() || Y.empty()) throw InvalidArgument("cpd: empty point set");
  // sum_{m,n} ||x_n - y_m||^2 = M sum ||x||^2 + N sum ||y||^2 - 2 (sum x).(sum y),
  // evaluated about the centroid of X.
  const MatrixX3 Xm = to_matrix(X.points);
  const MatrixX3 Ym = to_matrix(Y.points);
  const Eigen::RowVector3d c = Xm.colwise().mean();
  const MatrixX3 Xc = Xm.rowwise() - c;
  const MatrixX3 Yc = Ym.rowwise() - c;
  const double M = static_cast<double>(Y.size());
  const double N = static_cast<double>(X.size());
  const double total = M * Xc.squaredNorm() + N * Yc.squaredNorm() -
                       2.0 * Xc.colwise().sum().dot(Yc.colwise().sum());
  const double s2 = std::max(total, 0.0) / (kDim * M * N);
  if (!(s2 > 0.0))
    throw DegenerateInit("cpd: initial sigma^2 is zero (identical single points)");
  return s2;
}

Matrix build_cross_kernel(std::span<const Point3> points,
                          std::span<const Point3> template_points,
                          double beta) {
  if (!(beta > 0.0)) throw InvalidArgument("cpd: beta must be > 0");
  const double k = -0.5 / (beta * beta);
  Matrix G(static_cast<Eigen::Index>(points.size()),
           static_cast<Eigen::Index>(template_points.size()));
  for (std::size_t i = 0; i < points.size(); ++i)
    for (std::size_t j = 0; j < template_points.size(); ++j)
      G(i, j) = std::exp(k * (points[i] - template_points[j]).squaredNorm());
  return G;
}

Matrix build_kernel(const PointCloudFrame& Y, double beta) {
  if (!(beta > 0.0)) throw InvalidArgument("cpd: beta must be > 0");
  const auto M = static_cast<Eigen::Index>(Y.size());
  const double k = -0.5 / (beta * beta);
  Matrix G(M, M);
  for (Eigen::Index i = 0; i < M; ++i) {
    G(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < M; ++j) {
      const double v = std::exp(k * (Y.points[i] - Y.points[j]).squaredNorm());
      G(i, j) = v;
      G(j, i) = v;
    }
  }
  return G;
}

Correspondence e_step(const MatrixX3& X, const MatrixX3& T, double sigma2,
                      double outlier_w) {
  if (!(sigma2 > 0.0)) throw InvalidArgument("cpd: sigma2 must be > 0");
  if (!(outlier_w >= 0.0 && outlier_w < 1.0))
    throw InvalidArgument("cpd: outlier_w must lie in [0, 1)");
  return {e_step_impl(X, T, sigma2, outlier_w, true).P};
}

double neg_log_likelihood(const MatrixX3& X, const MatrixX3& T, double sigma2,
                          double outlier_w, double lambda_reg, const Matrix& G,
                          const MatrixX3& W) {
  return e_step_impl(X, T, sigma2, outlier_w, false).nll_data +
         penalty(lambda_reg, G, W);
}

namespace {

// With hold_unsupported, rows with support <= support_eps keep W_m = 0 (the
// limit of the (P~G + lambda sigma^2 I) system as P~_mm -> 0) instead of
// throwing; the remaining rows are solved exactly.
MStepResult m_step_impl(const MatrixX3& X, const MatrixX3& Y, const Matrix& G,
                        const Correspondence& corr, double sigma2_prev,
                        double lambda_reg, double sigma2_floor,
                        double support_eps, bool hold_unsupported) {
  const Matrix& P = corr.posterior;
  const auto M = Y.rows();
  if (P.rows() != M || P.cols() != X.rows() || G.rows() != M || G.cols() != M)
    throw InvalidArgument("cpd: m_step dimension mismatch");

  const Eigen::VectorXd p1 = P.rowwise().sum();        // P~ diagonal
  const Eigen::RowVectorXd pt1 = P.colwise().sum();    // P-breve diagonal
  const double np = p1.sum();

  std::vector<std::size_t> unsupported;
  for (Eigen::Index m = 0; m < M; ++m)
    if (!(p1[m] > support_eps)) unsupported.push_back(static_cast<std::size_t>(m));
  if (!unsupported.empty() && !(hold_unsupported && lambda_reg * sigma2_prev > 0.0))
    throw UnsupportedRows(std::move(unsupported));

  const MatrixX3 PX = P * X;
  const MatrixX3 B = PX - p1.asDiagonal() * Y;

  Eigen::VectorXd d = p1.cwiseSqrt();
  Eigen::VectorXd d_inv = d.cwiseInverse();
  for (const auto m : unsupported) {
    d[static_cast<Eigen::Index>(m)] = 0.0;
    d_inv[static_cast<Eigen::Index>(m)] = 0.0;
  }
  Matrix A = d.asDiagonal() * G * d.asDiagonal();
  A.diagonal().array() += lambda_reg * sigma2_prev;

  Eigen::LLT<Matrix> llt(A);
  if (llt.info() != Eigen::Success) {
    throw SingularSystem("cpd: W system is not positive definite", 0.0);
  }
  const double rcond = llt.rcond();
  if (!(rcond > std::numeric_limits<double>::epsilon())) {
    throw SingularSystem("cpd: W system is numerically singular (rcond " +
                             std::to_string(rcond) + ")",
                         rcond > 0.0 ? 1.0 / rcond
                                     : std::numeric_limits<double>::infinity());
  }
  const MatrixX3 Z = llt.solve(d_inv.asDiagonal() * B);

  MStepResult r;
  r.weights = d.asDiagonal() * Z;
  r.transformed = Y + G * r.weights;

  const double xpx = (X.rowwise().squaredNorm().transpose().array() * pt1.array()).sum();
  const double cross = (PX.array() * r.transformed.array()).sum();
  const double tpt = (r.transformed.rowwise().squaredNorm().array() * p1.array()).sum();
  const double s2 = (xpx - 2.0 * cross + tpt) / (np * kDim);
  r.sigma2 = std::max(s2, sigma2_floor);
  return r;
}

}  // namespace

MStepResult m_step(const MatrixX3& X, const MatrixX3& Y, const Matrix& G,
                   const Correspondence& corr, double sigma2_prev,
                   double lambda_reg, double sigma2_floor, double support_eps) {
  return m_step_impl(X, Y, G, corr, sigma2_prev, lambda_reg, sigma2_floor,
                     support_eps, false);
}

DeformationField register_nonrigid(const PointCloudFrame& X,
                                   const PointCloudFrame& Y,
                                   const CpdParams& params,
                                   const std::optional<WarmStart>& warm,
                                   const Matrix* kernel) {
  params.validate();
  if (X.empty() || Y.empty()) throw InvalidArgument("cpd: empty point set");

  DeformationField field;
  field.params = params;
  field.template_ref = Y;
  field.template_ref.timestamp = X.timestamp;
  field.kernel = kernel ? *kernel : build_kernel(Y, params.beta);
  const Matrix& G = field.kernel;
  if (G.rows() != static_cast<Eigen::Index>(Y.size()))
    throw InvalidArgument("cpd: kernel size does not match template");

  // Iterate in normalised coordinates: centred on the target centroid and
  // scaled by its RMS radius, so lambda and the uniform outlier density are
  // scale free. G is unchanged since beta scales with the points.
  MatrixX3 Xm = to_matrix(X.points);
  MatrixX3 Ym = to_matrix(Y.points);
  const Eigen::RowVector3d c = Xm.colwise().mean();
  Xm.rowwise() -= c;
  Ym.rowwise() -= c;
  double scale = std::sqrt(Xm.squaredNorm() / static_cast<double>(Xm.rows()));
  if (!(scale > 0.0)) scale = 1.0;
  Xm /= scale;
  Ym /= scale;
  const double s2 = scale * scale;
  const double floor_n = params.sigma2_floor / s2;

  MatrixX3 W;
  double sigma2;
  if (warm) {
    if (warm->weights.rows() != Ym.rows())
      throw InvalidArgument("cpd: warm-start weights do not match template");
    W = warm->weights / scale;
    sigma2 = std::max(warm->sigma2, params.sigma2_floor) / s2;
  } else {
    W = MatrixX3::Zero(Ym.rows(), 3);
    sigma2 = init_sigma2(X, Y) / s2;
  }

  for (int it = 0; it < params.max_iters; ++it) {
    const MatrixX3 T = Ym + G * W;
    EStepOutput e = e_step_impl(Xm, T, sigma2, params.outlier_w, true);
    field.neg_log_likelihood_trace.push_back(e.nll_data +
                                             penalty(params.lambda_reg, G, W));
    MStepResult ms = m_step_impl(Xm, Ym, G, Correspondence{std::move(e.P)}, sigma2,
                                 params.lambda_reg, floor_n, params.support_eps, true);
    W = std::move(ms.weights);
    const double rel = std::abs(ms.sigma2 - sigma2) / sigma2;
    sigma2 = ms.sigma2;
    ++field.iterations_run;
    if (sigma2 <= floor_n || rel < params.tol) {
      field.converged = true;
      break;
    }
  }
  field.neg_log_likelihood_trace.push_back(neg_log_likelihood(
      Xm, Ym + G * W, sigma2, params.outlier_w, params.lambda_reg, G, W));
  field.weights = W * scale;
  field.sigma2 = sigma2 * s2;
  return field;
}

PointCloudFrame apply_deformation(const DeformationField& field) {
  PointCloudFrame out;
  out.timestamp = field.template_ref.timestamp;
  const MatrixX3 T = to_matrix(field.template_ref.points) + field.kernel * field.weights;
  out.points = to_points(T);
  return out;
}

std::vector<Vec3> evaluate_displacement(const DeformationField& field,
                                        std::span<const Point3> points) {
  const Matrix Gz =
      build_cross_kernel(points, field.template_ref.points, field.params.beta);
  return to_points(Gz * field.weights);
}

std::vector<Point3> deform_points(std::span<const Point3> points,
                                  const Matrix& cross_kernel,
                                  const MatrixX3& weights) {
  if (cross_kernel.rows() != static_cast<Eigen::Index>(points.size()) ||
      cross_kernel.cols() != weights.rows())
    throw InvalidArgument("cpd: cross kernel shape mismatch");
  const MatrixX3 D = cross_kernel * weights;
  std::vector<Point3> out(points.size());
  for (std::size_t i = 0; i < points.size(); ++i)
    out[i] = points[i] + D.row(static_cast<Eigen::Index>(i)).transpose();
  return out;
}

}  // namespace defrad::cpd
