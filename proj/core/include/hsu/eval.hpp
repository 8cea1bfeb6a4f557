#pragma once

// Unmixing quality metrics and per-pixel diagnostic maps.

#include <map>

#include "hsu/model.hpp"

namespace hsu::eval {

struct MetricsReport {
  double armse = 0.0;
  std::map<int, double> per_class_rmse;
  double re = 0.0;
  double sam_rad = 0.0;
  double runtime_s = 0.0;
};

/// sqrt(1/(N R) sum_n ||a_n - a_hat_n||^2).
double armse(const MatrixXd& truth, const MatrixXd& estimate);

/// aRMSE over the pixels whose label equals class_id. `labels` holds one
/// entry per pixel in pixel order. Throws EmptyClassError if none match.
double per_class_rmse(const MatrixXd& truth, const MatrixXd& estimate,
                      const Eigen::VectorXi& labels, int class_id);

/// sqrt(1/(N L) sum_n ||y_hat_n - y_n||^2).
double reconstruction_error(const MatrixXd& Y, const MatrixXd& Y_hat);

/// Mean spectral angle in radians; cosines are clamped to [-1, 1].
double sam(const MatrixXd& Y, const MatrixXd& Y_hat);

/// ||y_n - M a_hat_n|| reshaped to rows x cols (row-major pixel order).
MatrixXd residual_energy_map(const SpectralCube& Y, const EndmemberMatrix& M,
                             const MatrixXd& A_est);

/// Row means of Gamma, aligned with dictionary.indices.
VectorXd mean_interaction_profile(const ResidualCoefficients& gamma,
                                  const InteractionDictionary& dictionary);

}  // namespace hsu::eval
