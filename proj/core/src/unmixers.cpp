#include "hsu/unmixers.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "hsu/errors.hpp"
#include "hsu/eval.hpp"

namespace hsu {

using admm::L1Term;
using admm::L21Term;
using admm::NonNegTerm;
using admm::QuadraticTerm;
using admm::Selection;
using admm::SplitTerm;
using admm::SumToOneTerm;

namespace {

void check_shapes(const SpectralCube& Y, const EndmemberMatrix& M) {
  if (Y.bands() != M.bands()) {
    throw ArgumentError("unmix: cube has " + std::to_string(Y.bands()) +
                        " bands, endmembers have " + std::to_string(M.bands()));
  }
}

MatrixXd stack(const EndmemberMatrix& M, const MatrixXd& P) {
  MatrixXd S(M.bands(), M.count() + P.cols());
  S << M.data(), P;
  return S;
}

std::vector<SplitTerm> residual_model_terms(const SpectralCube& Y, MatrixXd stacked,
                                            const UnmixSpec& spec,
                                            Selection nonneg_selection) {
  std::vector<SplitTerm> terms;
  terms.reserve(5);
  terms.push_back({QuadraticTerm(Y.data(), std::move(stacked)), Selection::Identity});
  terms.push_back({L1Term{spec.tau1}, Selection::ResidualRows});
  terms.push_back({L21Term{spec.tau2}, Selection::ResidualRows});
  terms.push_back({NonNegTerm{}, nonneg_selection});
  terms.push_back({SumToOneTerm{}, Selection::AbundanceRows});
  return terms;
}

}  // namespace

void UnmixSpec::validate() const {
  if (!std::isfinite(tau1) || tau1 < 0.0) throw ArgumentError("UnmixSpec: tau1 must be finite and >= 0");
  if (!std::isfinite(tau2) || tau2 < 0.0) throw ArgumentError("UnmixSpec: tau2 must be finite and >= 0");
  if (const auto* n = std::get_if<Nusal>(&method)) {
    if (n->order < 2) throw ArgumentError("UnmixSpec: NUSAL order must be >= 2");
    if (n->order > max_order) {
      throw ArgumentError("UnmixSpec: NUSAL order " + std::to_string(n->order) +
                          " exceeds the cap " + std::to_string(max_order));
    }
  }
  if (const auto* r = std::get_if<Rusal>(&method)) {
    if (r->dct_size < 1) throw ArgumentError("UnmixSpec: RUSAL D must be >= 1");
  }
  solver.validate();
}

UnmixSpec nusal_spec(int order) {
  UnmixSpec s;
  s.method = Nusal{order};
  s.tau1 = 0.05;
  s.tau2 = 0.05;
  return s;
}

UnmixSpec rusal_spec(int dct_size) {
  UnmixSpec s;
  s.method = Rusal{dct_size};
  s.tau1 = 0.01;
  s.tau2 = 0.01;
  return s;
}

UnmixSpec linear_spec() {
  UnmixSpec s;
  s.method = LinearBaseline{};
  s.tau1 = 0.0;
  s.tau2 = 0.0;
  return s;
}

AssembledProblem assemble_nusal(const SpectralCube& Y, const EndmemberMatrix& M,
                                const UnmixSpec& spec) {
  const auto* nusal = std::get_if<Nusal>(&spec.method);
  if (nusal == nullptr) throw ArgumentError("assemble_nusal: spec is not NUSAL");
  spec.validate();
  check_shapes(Y, M);
  InteractionDictionary dict = build_interaction_matrix(M, nusal->order, spec.dictionary_cap_bytes);
  auto terms = residual_model_terms(Y, stack(M, dict.Q), spec, Selection::Identity);
  admm::SplitProblem problem(M.count(), dict.size(), std::move(terms));
  MatrixXd P = dict.Q;
  return {std::move(problem), std::move(P), std::move(dict)};
}

AssembledProblem assemble_rusal(const SpectralCube& Y, const EndmemberMatrix& M,
                                const UnmixSpec& spec) {
  const auto* rusal = std::get_if<Rusal>(&spec.method);
  if (rusal == nullptr) throw ArgumentError("assemble_rusal: spec is not RUSAL");
  spec.validate();
  check_shapes(Y, M);
  SmoothDictionary dict = build_dct_dictionary(Y.bands(), rusal->dct_size);
  auto terms = residual_model_terms(Y, stack(M, dict.basis), spec, Selection::AbundanceRows);
  admm::SplitProblem problem(M.count(), dict.size(), std::move(terms));
  return {std::move(problem), std::move(dict.basis), std::nullopt};
}

AssembledProblem assemble_linear_baseline(const SpectralCube& Y, const EndmemberMatrix& M) {
  check_shapes(Y, M);
  std::vector<SplitTerm> terms;
  terms.push_back({QuadraticTerm(Y.data(), M.data()), Selection::Identity});
  terms.push_back({NonNegTerm{}, Selection::AbundanceRows});
  terms.push_back({SumToOneTerm{}, Selection::AbundanceRows});
  admm::SplitProblem problem(M.count(), 0, std::move(terms));
  return {std::move(problem), MatrixXd(M.bands(), 0), std::nullopt};
}

AssembledProblem assemble(const SpectralCube& Y, const EndmemberMatrix& M,
                          const UnmixSpec& spec) {
  if (std::holds_alternative<Nusal>(spec.method)) return assemble_nusal(Y, M, spec);
  if (std::holds_alternative<Rusal>(spec.method)) return assemble_rusal(Y, M, spec);
  spec.validate();
  return assemble_linear_baseline(Y, M);
}

MatrixXd project_simplex(const MatrixXd& V) {
  const Index R = V.rows();
  MatrixXd out(R, V.cols());
  std::vector<double> sorted(static_cast<std::size_t>(R));
  for (Index n = 0; n < V.cols(); ++n) {
    for (Index r = 0; r < R; ++r) sorted[static_cast<std::size_t>(r)] = V(r, n);
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    double cumulative = 0.0;
    double theta = 0.0;
    for (Index r = 0; r < R; ++r) {
      cumulative += sorted[static_cast<std::size_t>(r)];
      const double candidate = (cumulative - 1.0) / static_cast<double>(r + 1);
      if (sorted[static_cast<std::size_t>(r)] - candidate > 0.0) theta = candidate;
    }
    out.col(n) = (V.col(n).array() - theta).cwiseMax(0.0);
  }
  return out;
}

MatrixXd make_feasible(const MatrixXd& Z, Index endmembers, bool nonneg_residual) {
  MatrixXd out = Z;
  out.topRows(endmembers) = project_simplex(Z.topRows(endmembers));
  const Index D = Z.rows() - endmembers;
  if (nonneg_residual && D > 0) {
    out.bottomRows(D) = out.bottomRows(D).cwiseMax(0.0);
  }
  return out;
}

UnmixResult unmix(const SpectralCube& Y, const EndmemberMatrix& M, const UnmixSpec& spec,
                  const std::optional<MatrixXd>& init) {
  AssembledProblem assembled = assemble(Y, M, spec);
  const auto& problem = assembled.problem;
  auto solved = admm::solve(problem, spec.solver, init);

  const bool is_nusal = std::holds_alternative<Nusal>(spec.method);
  const Index R = M.count();
  const Index D = problem.residual_size();
  const MatrixXd Z = make_feasible(solved.state.Z, R, is_nusal);

  admm::SolverReport report = solved.report;
  report.objective = problem.objective(Z);

  std::optional<ResidualCoefficients> coeffs;
  MatrixXd residual_term = MatrixXd::Zero(Y.bands(), Y.pixels());
  if (D > 0) {
    coeffs.emplace(Z.bottomRows(D),
                   is_nusal ? ResidualKind::Nonlinear : ResidualKind::Mismodelling);
    residual_term = assembled.dictionary * Z.bottomRows(D);
  }
  MatrixXd A = Z.topRows(R);
  MatrixXd reconstruction = M.data() * A + residual_term;

  return UnmixResult{AbundanceMatrix(std::move(A)), std::move(coeffs),
                     std::move(reconstruction), std::move(residual_term), report,
                     std::move(assembled.interactions)};
}

std::vector<double> nusal_tau_grid() { return {0.01, 0.05, 0.1}; }

std::vector<double> rusal_tau_grid() { return {0.001, 0.003, 0.006, 0.01, 0.05, 0.1}; }

GridSearchResult grid_search(const SpectralCube& Y, const EndmemberMatrix& M,
                             const UnmixSpec& base, std::span<const double> grid,
                             const std::optional<MatrixXd>& truth) {
  if (grid.empty()) throw ArgumentError("grid_search: empty tau grid");
  std::optional<GridSearchResult> best;
  double best_score = 0.0;
  std::vector<GridPoint> points;
  for (double t1 : grid) {
    for (double t2 : grid) {
      UnmixSpec spec = base;
      spec.tau1 = t1;
      spec.tau2 = t2;
      UnmixResult res = unmix(Y, M, spec);
      const double score = truth ? eval::armse(*truth, res.abundances.data())
                                 : eval::reconstruction_error(Y.data(), res.reconstruction);
      points.push_back({t1, t2, score, res.report.converged, res.report});
      if (!best || score < best_score) {
        best_score = score;
        best = GridSearchResult{spec, std::move(res), {}};
      }
    }
  }
  best->points = std::move(points);
  return std::move(*best);
}

}  // namespace hsu
