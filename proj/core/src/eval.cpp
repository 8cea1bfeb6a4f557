#include "hsu/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "hsu/errors.hpp"

namespace hsu::eval {

namespace {

void require_same_shape(const MatrixXd& a, const MatrixXd& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ArgumentError(std::string(what) + ": shape mismatch (" + std::to_string(a.rows()) +
                        "x" + std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) +
                        "x" + std::to_string(b.cols()) + ")");
  }
}

double scaled_frobenius(const MatrixXd& a, const MatrixXd& b) {
  if (a.size() == 0) return 0.0;
  return std::sqrt((a - b).squaredNorm() / static_cast<double>(a.size()));
}

}  // namespace

double armse(const MatrixXd& truth, const MatrixXd& estimate) {
  require_same_shape(truth, estimate, "armse");
  return scaled_frobenius(truth, estimate);
}

double per_class_rmse(const MatrixXd& truth, const MatrixXd& estimate,
                      const Eigen::VectorXi& labels, int class_id) {
  require_same_shape(truth, estimate, "per_class_rmse");
  if (labels.size() != truth.cols()) {
    throw ArgumentError("per_class_rmse: " + std::to_string(labels.size()) +
                        " labels for " + std::to_string(truth.cols()) + " pixels");
  }
  double sum = 0.0;
  Index count = 0;
  for (Index n = 0; n < labels.size(); ++n) {
    if (labels(n) != class_id) continue;
    sum += (truth.col(n) - estimate.col(n)).squaredNorm();
    ++count;
  }
  if (count == 0) {
    throw EmptyClassError("per_class_rmse: class " + std::to_string(class_id) +
                          " has no pixels");
  }
  return std::sqrt(sum / static_cast<double>(count * truth.rows()));
}

double reconstruction_error(const MatrixXd& Y, const MatrixXd& Y_hat) {
  require_same_shape(Y, Y_hat, "reconstruction_error");
  return scaled_frobenius(Y, Y_hat);
}

double sam(const MatrixXd& Y, const MatrixXd& Y_hat) {
  require_same_shape(Y, Y_hat, "sam");
  if (Y.cols() == 0) return 0.0;
  const double floor = 4.0 * static_cast<double>(Y.rows() + 2) * std::numeric_limits<double>::epsilon();
  double total = 0.0;
  for (Index n = 0; n < Y.cols(); ++n) {
    const double ny = Y.col(n).norm();
    const double nh = Y_hat.col(n).norm();
    if (ny == 0.0 || nh == 0.0) {
      throw ArgumentError("sam: pixel " + std::to_string(n) + " has a zero-norm spectrum");
    }
    double cosine = std::clamp(Y_hat.col(n).dot(Y.col(n)) / (ny * nh), -1.0, 1.0);
    // Within rounding of 1 the spectra are parallel; acos would turn that noise into ~1e-8 rad.
    if (1.0 - cosine <= floor) cosine = 1.0;
    total += std::acos(cosine);
  }
  return total / static_cast<double>(Y.cols());
}

MatrixXd residual_energy_map(const SpectralCube& Y, const EndmemberMatrix& M,
                             const MatrixXd& A_est) {
  if (A_est.rows() != M.count() || A_est.cols() != Y.pixels() || M.bands() != Y.bands()) {
    throw ArgumentError("residual_energy_map: inconsistent cube, endmember and abundance shapes");
  }
  const VectorXd norms = (Y.data() - M.data() * A_est).colwise().norm().transpose();
  MatrixXd map(Y.rows(), Y.cols());
  for (Index n = 0; n < norms.size(); ++n) {
    map(n / Y.cols(), n % Y.cols()) = norms(n);
  }
  return map;
}

VectorXd mean_interaction_profile(const ResidualCoefficients& gamma,
                                  const InteractionDictionary& dictionary) {
  if (gamma.kind() != ResidualKind::Nonlinear) {
    throw ArgumentError("mean_interaction_profile: coefficients are not nonlinear (Gamma)");
  }
  if (gamma.data().rows() != dictionary.size()) {
    throw ArgumentError("mean_interaction_profile: " + std::to_string(gamma.data().rows()) +
                        " coefficient rows for a dictionary of " +
                        std::to_string(dictionary.size()));
  }
  if (gamma.data().cols() == 0) return VectorXd::Zero(gamma.data().rows());
  return gamma.data().rowwise().mean();
}

}  // namespace hsu::eval
