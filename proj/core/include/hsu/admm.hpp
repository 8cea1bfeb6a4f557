#pragma once

// ADMM for  min_Z sum_j g_j(H_j Z)  where every H_j selects a block of rows
// of Z = [A; X] (so G = sum_j H_j^T H_j is diagonal) and every g_j has a
// closed-form Moreau proximity operator.
//
// One iteration:
//   Z   <- G^{-1} sum_j H_j^T (U_j + D_j)
//   V_j <- H_j Z - D_j
//   U_j <- argmin_U (mu/2)||U - V_j||^2 + g_j(U)
//   D_j <- U_j - V_j

#include <iosfwd>
#include <optional>
#include <variant>
#include <vector>

#include "hsu/model.hpp"

namespace hsu::admm {

/// Which rows of Z = [A (R rows); X (D rows)] a term sees.
enum class Selection { Identity, ResidualRows, AbundanceRows };

/// g(U) = 0.5 ||Y - S U||_F^2 with S = [M, P]. The eigendecomposition of
/// S^T S is computed once so the prox is cheap for any mu.
class QuadraticTerm {
 public:
  QuadraticTerm(MatrixXd observations, MatrixXd stacked);

  /// (S^T S + mu I)^{-1} (S^T Y + mu V).
  MatrixXd prox(const MatrixXd& V, double mu) const;
  double value(const MatrixXd& Z) const;

  const MatrixXd& observations() const noexcept { return Y_; }
  const MatrixXd& stacked() const noexcept { return S_; }

 private:
  MatrixXd Y_;
  MatrixXd S_;
  MatrixXd eigvecs_;
  VectorXd eigvals_;
  MatrixXd projected_data_;  // E^T S^T Y
};

struct L1Term {
  double tau = 0.0;
};
struct L21Term {
  double tau = 0.0;
};
struct NonNegTerm {};
struct SumToOneTerm {};

using TermKind = std::variant<QuadraticTerm, L1Term, L21Term, NonNegTerm, SumToOneTerm>;

struct SplitTerm {
  TermKind kind;
  Selection selection = Selection::Identity;
};

class SplitProblem {
 public:
  /// Exactly one QuadraticTerm (with Identity selection) is required; it
  /// fixes N and L. Throws ArgumentError if G has a zero entry.
  SplitProblem(Index endmembers, Index residual_size, std::vector<SplitTerm> terms);

  Index endmembers() const noexcept { return R_; }
  Index residual_size() const noexcept { return D_; }
  Index variables() const noexcept { return R_ + D_; }
  Index pixels() const noexcept { return N_; }
  Index bands() const noexcept { return L_; }

  const std::vector<SplitTerm>& terms() const noexcept { return terms_; }
  const QuadraticTerm& quadratic() const;
  /// Diagonal of G.
  const VectorXd& gram_diagonal() const noexcept { return G_; }

  Index block_rows(Selection s) const noexcept;
  MatrixXd select(Selection s, const MatrixXd& Z) const;
  /// acc += H^T U.
  void scatter_add(Selection s, const MatrixXd& U, MatrixXd& acc) const;

  /// Sum of the finite-valued terms at Z; indicator terms contribute 0.
  double objective(const MatrixXd& Z) const;

 private:
  Index R_;
  Index D_;
  Index N_ = 0;
  Index L_ = 0;
  std::vector<SplitTerm> terms_;
  VectorXd G_;
  std::size_t quadratic_index_ = 0;
};

enum class StopRule {
  Either,  // stop when the primal OR the dual residual is below threshold
  Both,
};

struct SolverOptions {
  double mu0 = 0.05;
  int max_iter = 1000;
  double tol = 1e-4;
  double adapt_ratio = 10.0;
  double adapt_factor = 2.0;
  bool adapt = true;
  /// mu is revisited every `adapt_interval` iterations.
  int adapt_interval = 10;
  StopRule stop_rule = StopRule::Both;
  bool record_history = false;

  /// Throws ArgumentError on non-positive values or adapt_factor <= 1.
  void validate() const;
};

struct HistoryEntry {
  int iter = 0;
  double primal = 0.0;
  double dual = 0.0;
  double mu = 0.0;
  double objective = 0.0;
};

struct SolverState {
  MatrixXd Z;
  std::vector<MatrixXd> U;
  std::vector<MatrixXd> D;
  double mu = 0.0;
  int iter = 0;
  double primal_res = 0.0;
  double dual_res = 0.0;
  std::vector<HistoryEntry> history;
};

struct SolverReport {
  bool converged = false;
  int iterations = 0;
  double primal_res = 0.0;
  double dual_res = 0.0;
  double threshold = 0.0;
  double objective = 0.0;
  double wall_time_s = 0.0;
};

struct Residuals {
  double primal = 0.0;
  double dual = 0.0;
};

struct PenaltyUpdate {
  double mu = 0.0;
  /// Factor applied to every scaled multiplier D_j.
  double rescale = 1.0;
};

struct SolveResult {
  SolverState state;
  SolverReport report;
};

MatrixXd prox_quadratic(const MatrixXd& V1, const MatrixXd& Y,
                        const MatrixXd& stacked, double mu);
/// Element-wise soft threshold.
MatrixXd prox_l1(const MatrixXd& V, double threshold);
/// Column-wise vector soft threshold.
MatrixXd prox_l21(const MatrixXd& V, double threshold);
MatrixXd project_nonneg(const MatrixXd& V);
/// Euclidean projection of each column onto {u : 1^T u = 1}.
MatrixXd project_sum_to_one(const MatrixXd& V);

/// primal = sqrt(sum_j ||H_j Z - U_j||^2),
/// dual   = mu * sqrt(sum_j ||H_j^T (U_j - prev_U_j)||^2).
Residuals compute_residuals(const SolverState& state, const SplitProblem& problem,
                            const std::vector<MatrixXd>& prev_U);

PenaltyUpdate adapt_penalty(double mu, double primal, double dual,
                            const SolverOptions& opts);

/// Uniform abundances 1/R and a zero residual block.
MatrixXd default_initial_point(const SplitProblem& problem);

/// Runs ADMM from `init` (or default_initial_point). Non-convergence is
/// reported, not thrown; a non-finite iterate throws NumericError.
SolveResult solve(const SplitProblem& problem, const SolverOptions& opts,
                  const std::optional<MatrixXd>& init = std::nullopt);

/// CSV with header iter,primal,dual,mu,objective.
void write_history_csv(std::ostream& os, const std::vector<HistoryEntry>& history);

}  // namespace hsu::admm
