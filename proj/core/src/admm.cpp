#include "hsu/admm.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <string>

#include "hsu/errors.hpp"

namespace hsu::admm {

namespace {

template <class... Fs>
struct Overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
Overloaded(Fs...) -> Overloaded<Fs...>;

MatrixXd apply_prox(const TermKind& kind, const MatrixXd& V, double mu) {
  return std::visit(
      Overloaded{
          [&](const QuadraticTerm& q) { return q.prox(V, mu); },
          [&](const L1Term& t) { return prox_l1(V, t.tau / mu); },
          [&](const L21Term& t) { return prox_l21(V, t.tau / mu); },
          [&](const NonNegTerm&) { return project_nonneg(V); },
          [&](const SumToOneTerm&) { return project_sum_to_one(V); },
      },
      kind);
}

}  // namespace

QuadraticTerm::QuadraticTerm(MatrixXd observations, MatrixXd stacked)
    : Y_(std::move(observations)), S_(std::move(stacked)) {
  if (Y_.rows() != S_.rows()) {
    throw ArgumentError("QuadraticTerm: observations have " + std::to_string(Y_.rows()) +
                        " bands but operator has " + std::to_string(S_.rows()));
  }
  if (!Y_.allFinite() || !S_.allFinite()) {
    throw NumericError("QuadraticTerm: non-finite observations or operator");
  }
  const MatrixXd gram = S_.transpose() * S_;
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(gram);
  if (eig.info() != Eigen::Success) {
    throw NumericError("QuadraticTerm: eigendecomposition of S^T S failed");
  }
  eigvecs_ = eig.eigenvectors();
  // Gram matrices are PSD; clip round-off negatives.
  eigvals_ = eig.eigenvalues().cwiseMax(0.0);
  projected_data_ = eigvecs_.transpose() * (S_.transpose() * Y_);
}

MatrixXd QuadraticTerm::prox(const MatrixXd& V, double mu) const {
  if (V.rows() != S_.cols() || V.cols() != Y_.cols()) {
    throw ArgumentError("QuadraticTerm::prox: V is " + std::to_string(V.rows()) + "x" +
                        std::to_string(V.cols()) + ", expected " +
                        std::to_string(S_.cols()) + "x" + std::to_string(Y_.cols()));
  }
  MatrixXd t = projected_data_;
  t.noalias() += mu * (eigvecs_.transpose() * V);
  t = (eigvals_.array() + mu).inverse().matrix().asDiagonal() * t;
  return eigvecs_ * t;
}

double QuadraticTerm::value(const MatrixXd& Z) const {
  return 0.5 * (Y_ - S_ * Z).squaredNorm();
}

SplitProblem::SplitProblem(Index endmembers, Index residual_size,
                           std::vector<SplitTerm> terms)
    : R_(endmembers), D_(residual_size), terms_(std::move(terms)) {
  if (R_ < 1) throw ArgumentError("SplitProblem: need at least one abundance row");
  if (D_ < 0) throw ArgumentError("SplitProblem: negative residual size");

  int quadratics = 0;
  for (std::size_t j = 0; j < terms_.size(); ++j) {
    const auto& term = terms_[j];
    if (const auto* q = std::get_if<QuadraticTerm>(&term.kind)) {
      ++quadratics;
      quadratic_index_ = j;
      if (term.selection != Selection::Identity) {
        throw ArgumentError("SplitProblem: the quadratic term must act on all of Z");
      }
      if (q->stacked().cols() != R_ + D_) {
        throw ArgumentError("SplitProblem: operator has " +
                            std::to_string(q->stacked().cols()) +
                            " columns, expected R + D = " + std::to_string(R_ + D_));
      }
      N_ = q->observations().cols();
      L_ = q->observations().rows();
    } else if (const auto* l1 = std::get_if<L1Term>(&term.kind)) {
      if (!(l1->tau >= 0.0) || !std::isfinite(l1->tau)) {
        throw ArgumentError("SplitProblem: l1 weight must be finite and >= 0");
      }
    } else if (const auto* l21 = std::get_if<L21Term>(&term.kind)) {
      if (!(l21->tau >= 0.0) || !std::isfinite(l21->tau)) {
        throw ArgumentError("SplitProblem: l21 weight must be finite and >= 0");
      }
    }
    if (block_rows(term.selection) == 0) {
      throw ArgumentError("SplitProblem: term " + std::to_string(j) +
                          " selects an empty block");
    }
  }
  if (quadratics != 1) {
    throw ArgumentError("SplitProblem: exactly one quadratic data term is required");
  }

  G_ = VectorXd::Zero(R_ + D_);
  for (const auto& term : terms_) {
    switch (term.selection) {
      case Selection::Identity: G_.array() += 1.0; break;
      case Selection::AbundanceRows: G_.head(R_).array() += 1.0; break;
      case Selection::ResidualRows: G_.tail(D_).array() += 1.0; break;
    }
  }
  for (Index i = 0; i < G_.size(); ++i) {
    if (G_(i) <= 0.0) {
      throw ArgumentError("SplitProblem: G is rank deficient at row " + std::to_string(i));
    }
  }
}

const QuadraticTerm& SplitProblem::quadratic() const {
  return std::get<QuadraticTerm>(terms_[quadratic_index_].kind);
}

Index SplitProblem::block_rows(Selection s) const noexcept {
  switch (s) {
    case Selection::Identity: return R_ + D_;
    case Selection::AbundanceRows: return R_;
    case Selection::ResidualRows: return D_;
  }
  return 0;
}

MatrixXd SplitProblem::select(Selection s, const MatrixXd& Z) const {
  switch (s) {
    case Selection::Identity: return Z;
    case Selection::AbundanceRows: return Z.topRows(R_);
    case Selection::ResidualRows: return Z.bottomRows(D_);
  }
  return {};
}

void SplitProblem::scatter_add(Selection s, const MatrixXd& U, MatrixXd& acc) const {
  switch (s) {
    case Selection::Identity: acc += U; break;
    case Selection::AbundanceRows: acc.topRows(R_) += U; break;
    case Selection::ResidualRows: acc.bottomRows(D_) += U; break;
  }
}

double SplitProblem::objective(const MatrixXd& Z) const {
  double total = 0.0;
  for (const auto& term : terms_) {
    const MatrixXd block = select(term.selection, Z);
    total += std::visit(
        Overloaded{
            [&](const QuadraticTerm& q) { return q.value(block); },
            [&](const L1Term& t) { return t.tau * block.lpNorm<1>(); },
            [&](const L21Term& t) { return t.tau * block.colwise().norm().sum(); },
            [](const NonNegTerm&) { return 0.0; },
            [](const SumToOneTerm&) { return 0.0; },
        },
        term.kind);
  }
  return total;
}

void SolverOptions::validate() const {
  if (!(mu0 > 0.0)) throw ArgumentError("SolverOptions: mu0 must be > 0");
  if (max_iter < 1) throw ArgumentError("SolverOptions: max_iter must be >= 1");
  if (!(tol >= 0.0)) throw ArgumentError("SolverOptions: tol must be >= 0");
  if (!(adapt_ratio > 0.0)) throw ArgumentError("SolverOptions: adapt_ratio must be > 0");
  if (!(adapt_factor > 1.0)) throw ArgumentError("SolverOptions: adapt_factor must be > 1");
  if (adapt_interval < 1) throw ArgumentError("SolverOptions: adapt_interval must be >= 1");
}

MatrixXd prox_quadratic(const MatrixXd& V1, const MatrixXd& Y,
                        const MatrixXd& stacked, double mu) {
  if (!(mu > 0.0)) throw ArgumentError("prox_quadratic: mu must be > 0");
  if (!V1.allFinite()) throw NumericError("prox_quadratic: non-finite V");
  return QuadraticTerm(Y, stacked).prox(V1, mu);
}

MatrixXd prox_l1(const MatrixXd& V, double threshold) {
  if (!(threshold >= 0.0)) throw ArgumentError("prox_l1: threshold must be >= 0");
  return V.unaryExpr([threshold](double v) {
    const double mag = std::abs(v) - threshold;
    return mag > 0.0 ? std::copysign(mag, v) : 0.0;
  });
}

MatrixXd prox_l21(const MatrixXd& V, double threshold) {
  if (!(threshold >= 0.0)) throw ArgumentError("prox_l21: threshold must be >= 0");
  MatrixXd out(V.rows(), V.cols());
  for (Index n = 0; n < V.cols(); ++n) {
    const double shrunk = std::max(V.col(n).norm() - threshold, 0.0);
    if (shrunk == 0.0) {
      out.col(n).setZero();
    } else {
      out.col(n) = V.col(n) * (shrunk / (shrunk + threshold));
    }
  }
  return out;
}

MatrixXd project_nonneg(const MatrixXd& V) {
  return V.unaryExpr([](double v) { return v > 0.0 ? v : 0.0; });
}

MatrixXd project_sum_to_one(const MatrixXd& V) {
  const double R = static_cast<double>(V.rows());
  if (V.rows() < 1) throw ArgumentError("project_sum_to_one: empty columns");
  MatrixXd out = V;
  for (Index n = 0; n < V.cols(); ++n) {
    const double shift = (1.0 - V.col(n).sum()) / R;
    out.col(n).array() += shift;
  }
  return out;
}

Residuals compute_residuals(const SolverState& state, const SplitProblem& problem,
                            const std::vector<MatrixXd>& prev_U) {
  const auto& terms = problem.terms();
  if (state.U.size() != terms.size() || prev_U.size() != terms.size()) {
    throw ArgumentError("compute_residuals: one U per term is required");
  }
  double primal_sq = 0.0;
  double dual_sq = 0.0;
  for (std::size_t j = 0; j < terms.size(); ++j) {
    // H_j^T only pads with zeros, so its norm equals the block's norm.
    primal_sq += (problem.select(terms[j].selection, state.Z) - state.U[j]).squaredNorm();
    dual_sq += (state.U[j] - prev_U[j]).squaredNorm();
  }
  return {std::sqrt(primal_sq), state.mu * std::sqrt(dual_sq)};
}

PenaltyUpdate adapt_penalty(double mu, double primal, double dual,
                            const SolverOptions& opts) {
  if (!(mu > 0.0)) throw ArgumentError("adapt_penalty: mu must be > 0");
  if (primal > opts.adapt_ratio * dual) {
    return {mu * opts.adapt_factor, 1.0 / opts.adapt_factor};
  }
  if (dual > opts.adapt_ratio * primal) {
    return {mu / opts.adapt_factor, opts.adapt_factor};
  }
  return {mu, 1.0};
}

MatrixXd default_initial_point(const SplitProblem& problem) {
  MatrixXd Z = MatrixXd::Zero(problem.variables(), problem.pixels());
  Z.topRows(problem.endmembers()).setConstant(1.0 / static_cast<double>(problem.endmembers()));
  return Z;
}

SolveResult solve(const SplitProblem& problem, const SolverOptions& opts,
                  const std::optional<MatrixXd>& init) {
  opts.validate();
  const auto start = std::chrono::steady_clock::now();
  const auto& terms = problem.terms();
  const std::size_t J = terms.size();

  SolveResult result;
  SolverState& st = result.state;
  st.Z = init ? *init : default_initial_point(problem);
  if (st.Z.rows() != problem.variables() || st.Z.cols() != problem.pixels()) {
    throw ArgumentError("solve: initial Z has the wrong shape");
  }
  if (!st.Z.allFinite()) throw NumericError("solve: non-finite initial Z");
  st.mu = opts.mu0;
  st.U.reserve(J);
  st.D.reserve(J);
  for (const auto& term : terms) {
    st.U.push_back(problem.select(term.selection, st.Z));
    st.D.push_back(MatrixXd::Zero(st.U.back().rows(), st.U.back().cols()));
  }

  const double threshold =
      opts.tol * std::sqrt(static_cast<double>(problem.variables() * problem.pixels()));
  const VectorXd inv_g = problem.gram_diagonal().cwiseInverse();
  std::vector<MatrixXd> prev_U(J);
  MatrixXd rhs(problem.variables(), problem.pixels());
  bool converged = false;

  for (st.iter = 1; st.iter <= opts.max_iter; ++st.iter) {
    rhs.setZero();
    for (std::size_t j = 0; j < J; ++j) {
      problem.scatter_add(terms[j].selection, st.U[j] + st.D[j], rhs);
    }
    st.Z = inv_g.asDiagonal() * rhs;
    if (!st.Z.allFinite()) {
      throw NumericError("solve: non-finite iterate at iteration " + std::to_string(st.iter));
    }

    for (std::size_t j = 0; j < J; ++j) {
      const MatrixXd V = problem.select(terms[j].selection, st.Z) - st.D[j];
      prev_U[j] = std::move(st.U[j]);
      st.U[j] = apply_prox(terms[j].kind, V, st.mu);
      st.D[j] = st.U[j] - V;
    }

    const Residuals res = compute_residuals(st, problem, prev_U);
    st.primal_res = res.primal;
    st.dual_res = res.dual;
    if (!std::isfinite(res.primal) || !std::isfinite(res.dual)) {
      throw NumericError("solve: non-finite residual at iteration " + std::to_string(st.iter));
    }
    if (opts.record_history) {
      st.history.push_back({st.iter, res.primal, res.dual, st.mu, problem.objective(st.Z)});
    }

    const bool primal_ok = res.primal < threshold;
    const bool dual_ok = res.dual < threshold;
    const bool stop = opts.stop_rule == StopRule::Both ? (primal_ok && dual_ok)
                                                       : (primal_ok || dual_ok);
    if (stop) {
      converged = true;
      break;
    }

    if (opts.adapt && st.iter % opts.adapt_interval == 0) {
      const PenaltyUpdate upd = adapt_penalty(st.mu, res.primal, res.dual, opts);
      if (upd.rescale != 1.0) {
        for (auto& d : st.D) d *= upd.rescale;
      }
      st.mu = upd.mu;
    }
  }
  if (!converged) st.iter = opts.max_iter;

  SolverReport& rep = result.report;
  rep.converged = converged;
  rep.iterations = st.iter;
  rep.primal_res = st.primal_res;
  rep.dual_res = st.dual_res;
  rep.threshold = threshold;
  rep.objective = problem.objective(st.Z);
  rep.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

void write_history_csv(std::ostream& os, const std::vector<HistoryEntry>& history) {
  os << "iter,primal,dual,mu,objective\n";
  const auto flags = os.flags();
  const auto prec = os.precision();
  os << std::setprecision(17);
  for (const auto& h : history) {
    os << h.iter << ',' << h.primal << ',' << h.dual << ',' << h.mu << ',' << h.objective
       << '\n';
  }
  os.flags(flags);
  os.precision(prec);
}

}  // namespace hsu::admm
