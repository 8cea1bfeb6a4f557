#pragma once

#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "hsu/admm.hpp"
#include "hsu/model.hpp"

namespace hsu {

/// Nonlinear unmixing with interaction orders 2..order.
struct Nusal {
  int order = 2;
};
/// Robust unmixing with a `dct_size`-column smooth residual dictionary.
struct Rusal {
  int dct_size = 20;
};
/// Fully-constrained linear unmixing (ANC + ASC, no residual term).
struct LinearBaseline {};

using Method = std::variant<Nusal, Rusal, LinearBaseline>;

struct UnmixSpec {
  Method method = Nusal{};
  double tau1 = 0.05;
  double tau2 = 0.05;
  admm::SolverOptions solver;
  int max_order = 5;
  std::size_t dictionary_cap_bytes = kDefaultDictionaryCapBytes;

  void validate() const;
};

/// tau1 = tau2 = 0.05.
UnmixSpec nusal_spec(int order = 2);
/// tau1 = tau2 = 0.01.
UnmixSpec rusal_spec(int dct_size = 20);
UnmixSpec linear_spec();

struct UnmixResult {
  AbundanceMatrix abundances;
  /// Empty for LinearBaseline.
  std::optional<ResidualCoefficients> residual_coeffs;
  MatrixXd reconstruction;
  /// P X, the per-pixel residual spectra.
  MatrixXd residual_term;
  /// Objective evaluated at the returned (feasible) solution.
  admm::SolverReport report;
  /// Present for Nusal runs.
  std::optional<InteractionDictionary> interactions;
};

struct AssembledProblem {
  admm::SplitProblem problem;
  /// The residual dictionary P (L x D); zero columns for LinearBaseline.
  MatrixXd dictionary;
  std::optional<InteractionDictionary> interactions;
};

/// g1 quadratic on I, tau1 l1 and tau2 l21 on the residual rows,
/// nonnegativity on all of Z, sum-to-one on the abundance rows.
AssembledProblem assemble_nusal(const SpectralCube& Y, const EndmemberMatrix& M,
                                const UnmixSpec& spec);
/// As NUSAL but nonnegativity on the abundance rows only and P = DCT basis.
AssembledProblem assemble_rusal(const SpectralCube& Y, const EndmemberMatrix& M,
                                const UnmixSpec& spec);
AssembledProblem assemble_linear_baseline(const SpectralCube& Y, const EndmemberMatrix& M);
AssembledProblem assemble(const SpectralCube& Y, const EndmemberMatrix& M,
                          const UnmixSpec& spec);

/// Projects the abundance block onto the simplex and, for nonlinear
/// problems, clamps the residual block at zero.
MatrixXd make_feasible(const MatrixXd& Z, Index endmembers, bool nonneg_residual);

/// Euclidean projection of each column onto the probability simplex.
MatrixXd project_simplex(const MatrixXd& V);

UnmixResult unmix(const SpectralCube& Y, const EndmemberMatrix& M, const UnmixSpec& spec,
                  const std::optional<MatrixXd>& init = std::nullopt);

struct GridPoint {
  double tau1 = 0.0;
  double tau2 = 0.0;
  /// aRMSE when ground truth was supplied, RE otherwise.
  double score = 0.0;
  bool converged = false;
  admm::SolverReport report;
};

struct GridSearchResult {
  UnmixSpec best_spec;
  UnmixResult best;
  std::vector<GridPoint> points;
};

/// {0.01, 0.05, 0.1}.
std::vector<double> nusal_tau_grid();
/// {0.001, 0.003, 0.006, 0.01, 0.05, 0.1}.
std::vector<double> rusal_tau_grid();

/// Tries every (tau1, tau2) pair of `grid` and keeps the one with the
/// smallest aRMSE against `truth`, or smallest RE when no truth is given.
GridSearchResult grid_search(const SpectralCube& Y, const EndmemberMatrix& M,
                             const UnmixSpec& base, std::span<const double> grid,
                             const std::optional<MatrixXd>& truth = std::nullopt);

}  // namespace hsu
