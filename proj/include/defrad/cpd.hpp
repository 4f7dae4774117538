#ifndef DEFRAD_CPD_HPP
#define DEFRAD_CPD_HPP

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "defrad/geometry.hpp"

namespace defrad::cpd {

using Matrix = Eigen::MatrixXd;
using MatrixX3 = Eigen::Matrix<double, Eigen::Dynamic, 3>;

/// Coherent point drift hyperparameters.
struct CpdParams {
  double beta = 0.1;          ///< Gaussian kernel width [m]
  double lambda_reg = 2.0;    ///< motion-coherence weight
  double outlier_w = 0.1;     ///< uniform outlier mass, in [0, 1)
  int max_iters = 100;
  double tol = 1e-6;          ///< relative sigma^2 change for convergence
  double sigma2_floor = 1e-10;  ///< [m^2]; (10 um)^2
  double support_eps = 1e-12;   ///< minimum column mass of a supported row

  void validate() const;
};

/// Posterior correspondence matrix P (M x N), p_mn in [0, 1].
struct Correspondence {
  Matrix posterior;
};

/// Result of one M-step.
struct MStepResult {
  MatrixX3 weights;      ///< W (M x 3) [m]
  double sigma2 = 0.0;   ///< [m^2]
  MatrixX3 transformed;  ///< T = Y + G W
};

/**
 * @brief Fitted non-rigid deformation of a template onto one target frame.
 *
 * The displacement of template point m is row m of G W. The same field can
 * be evaluated anywhere via evaluate_displacement().
 */
struct DeformationField {
  PointCloudFrame template_ref;  ///< Y
  Matrix kernel;                 ///< G (M x M)
  MatrixX3 weights;              ///< W (M x 3)
  double sigma2 = 0.0;
  int iterations_run = 0;
  bool converged = false;
  /// Penalised GMM negative log-likelihood (outlier component included)
  /// evaluated at the parameters entering each iteration, plus one final
  /// entry. Computed in normalised coordinates (see register_nonrigid).
  std::vector<double> neg_log_likelihood_trace;
  CpdParams params;
};

/// Warm-start state carried from a previous frame.
struct WarmStart {
  MatrixX3 weights;
  double sigma2 = 0.0;
};

MatrixX3 to_matrix(std::span<const Point3> points);
std::vector<Point3> to_points(const MatrixX3& m);

/// sigma^2 = sum_{m,n} ||x_n - y_m||^2 / (3 M N). Throws DegenerateInit if 0.
double init_sigma2(const PointCloudFrame& X, const PointCloudFrame& Y);

/// G_ij = exp(-||y_i - y_j||^2 / (2 beta^2)).
Matrix build_kernel(const PointCloudFrame& Y, double beta);

/// Cross kernel between arbitrary points (rows) and template points (cols).
Matrix build_cross_kernel(std::span<const Point3> points,
                          std::span<const Point3> template_points, double beta);

/// E-step posteriors for the current transformed template T (M x 3).
Correspondence e_step(const MatrixX3& X, const MatrixX3& T, double sigma2,
                      double outlier_w);

/// Penalised negative log-likelihood of X under the mixture centred on T.
double neg_log_likelihood(const MatrixX3& X, const MatrixX3& T, double sigma2,
                          double outlier_w, double lambda_reg,
                          const Matrix& G, const MatrixX3& W);

/**
 * @brief M-step: weights W, variance sigma^2 and transformed template T.
 *
 * Solves (P1 G + lambda sigma^2 I) W = P X - P1 Y with P1 = diag(P 1) via the
 * symmetric positive-definite system (D G D + lambda sigma^2 I) Z = D^-1 B,
 * W = D Z, D = P1^(1/2). sigma^2 is floored at `sigma2_floor`.
 *
 * Throws UnsupportedRows when some P1_mm <= support_eps and SingularSystem
 * when the factorisation fails.
 */
MStepResult m_step(const MatrixX3& X, const MatrixX3& Y, const Matrix& G,
                   const Correspondence& P, double sigma2_prev,
                   double lambda_reg, double sigma2_floor = 1e-10,
                   double support_eps = 1e-12);

/**
 * @brief Registers template Y onto target X with coherent point drift.
 *
 * Alternates E and M steps until the relative sigma^2 change drops below
 * params.tol, sigma^2 reaches the floor, or max_iters is hit (then
 * `converged` is false; this is not an error). A warm start replaces the
 * W = 0 / sigma^2-from-data initialisation. `kernel` may be supplied to
 * avoid rebuilding G for every frame of a sequence.
 *
 * Iterations run on coordinates centred at the centroid of X and divided by
 * its RMS radius; W and sigma^2 are returned in metres. Template points whose
 * support falls to params.support_eps keep a zero weight row for that
 * iteration (requires lambda_reg > 0; otherwise UnsupportedRows propagates).
 */
DeformationField register_nonrigid(const PointCloudFrame& X,
                                   const PointCloudFrame& Y,
                                   const CpdParams& params,
                                   const std::optional<WarmStart>& warm = {},
                                   const Matrix* kernel = nullptr);

/// T = Y + G W with the template's point order and the target's timestamp.
PointCloudFrame apply_deformation(const DeformationField& field);

/// Displacement sum_m G(z, y_m) w_m at arbitrary points z.
std::vector<Vec3> evaluate_displacement(const DeformationField& field,
                                        std::span<const Point3> points);

/// Applies a field to points using a precomputed cross kernel
/// (rows: points, cols: template points).
std::vector<Point3> deform_points(std::span<const Point3> points,
                                  const Matrix& cross_kernel,
                                  const MatrixX3& weights);

}  // namespace defrad::cpd

#endif  // DEFRAD_CPD_HPP
