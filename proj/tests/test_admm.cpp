#include <gtest/gtest.h>

#include <chrono>
#include <sstream>

#include "hsu/admm.hpp"
#include "hsu/errors.hpp"
#include "oracles.hpp"

using namespace hsu;
using namespace hsu::admm;

namespace {

MatrixXd col(std::initializer_list<double> v) {
  MatrixXd m(static_cast<Index>(v.size()), 1);
  Index i = 0;
  for (double x : v) m(i++, 0) = x;
  return m;
}

// A small NUSAL-shaped problem built directly from terms.
SplitProblem small_problem(Index L, Index R, Index D, Index N, std::uint64_t seed) {
  const MatrixXd S = oracle::random_matrix(L, R + D, seed, 0.0, 1.0);
  MatrixXd Z = MatrixXd::Zero(R + D, N);
  Z.topRows(R) = oracle::random_simplex(R, N, seed + 1);
  Z.bottomRows(D) = oracle::random_matrix(D, N, seed + 2, 0.0, 0.2);
  const MatrixXd Y = S * Z;
  std::vector<SplitTerm> terms;
  terms.push_back({QuadraticTerm(Y, S), Selection::Identity});
  terms.push_back({L1Term{0.01}, Selection::ResidualRows});
  terms.push_back({L21Term{0.01}, Selection::ResidualRows});
  terms.push_back({NonNegTerm{}, Selection::Identity});
  terms.push_back({SumToOneTerm{}, Selection::AbundanceRows});
  return SplitProblem(R, D, std::move(terms));
}

}  // namespace

TEST(ProxQuadratic, DataConsistentPointIsFixed) {
  const MatrixXd S = oracle::random_matrix(8, 4, 1);
  const MatrixXd Z = oracle::random_matrix(4, 3, 2);
  const MatrixXd Y = S * Z;
  for (double mu : {1e-3, 0.05, 1.0, 100.0}) {
    EXPECT_LT((prox_quadratic(Z, Y, S, mu) - Z).cwiseAbs().maxCoeff(), 1e-10) << mu;
  }
}

TEST(ProxQuadratic, LargePenaltyReturnsInput) {
  const MatrixXd S = oracle::random_matrix(8, 4, 3);
  const MatrixXd Y = oracle::random_matrix(8, 3, 4);
  const MatrixXd V = oracle::random_matrix(4, 3, 5);
  const MatrixXd out = prox_quadratic(V, Y, S, 1e12);
  EXPECT_LT((out - V).norm() / V.norm(), 1e-6);
}

TEST(ProxQuadratic, MatchesDenseSolveSeed11) {
  const MatrixXd S = oracle::random_matrix(5, 3, 11);
  const MatrixXd Y = oracle::random_matrix(5, 4, 12);
  const MatrixXd V = oracle::random_matrix(3, 4, 13);
  for (double mu : {0.01, 0.5, 7.0}) {
    const MatrixXd expected = oracle::dense_quadratic_prox(V, Y, S, mu);
    EXPECT_LT((prox_quadratic(V, Y, S, mu) - expected).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(ProxQuadratic, CachedTermHandlesChangingPenalty) {
  const MatrixXd S = oracle::random_matrix(12, 5, 14);
  const MatrixXd Y = oracle::random_matrix(12, 6, 15);
  const MatrixXd V = oracle::random_matrix(5, 6, 16);
  const QuadraticTerm q(Y, S);
  for (double mu : {0.02, 0.04, 0.08, 0.01}) {
    EXPECT_LT((q.prox(V, mu) - oracle::dense_quadratic_prox(V, Y, S, mu)).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(ProxQuadratic, RejectsNonFiniteInput) {
  const MatrixXd S = oracle::random_matrix(5, 3, 11);
  const MatrixXd Y = oracle::random_matrix(5, 1, 12);
  MatrixXd V = MatrixXd::Zero(3, 1);
  V(1, 0) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(prox_quadratic(V, Y, S, 1.0), NumericError);
  EXPECT_THROW(prox_quadratic(MatrixXd::Zero(3, 1), Y, S, 0.0), ArgumentError);
}

TEST(ProxL1, Examples) {
  EXPECT_EQ(prox_l1(col({0.5}), 1.0)(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(prox_l1(col({2.0}), 0.5)(0, 0), 1.5);
  EXPECT_DOUBLE_EQ(prox_l1(col({-3.0}), 1.0)(0, 0), -2.0);
  EXPECT_THROW(prox_l1(col({1.0}), -1.0), ArgumentError);
}

TEST(ProxL21, Examples) {
  EXPECT_EQ(prox_l21(col({3.0, 4.0}), 5.0), col({0.0, 0.0}));
  const MatrixXd half = prox_l21(col({3.0, 4.0}), 2.5);
  EXPECT_DOUBLE_EQ(half(0, 0), 1.5);
  EXPECT_DOUBLE_EQ(half(1, 0), 2.0);
  EXPECT_EQ(prox_l21(col({0.0, 0.0}), 0.7), col({0.0, 0.0}));
  EXPECT_EQ(prox_l21(col({0.0, 0.0}), 0.0), col({0.0, 0.0}));
}

TEST(ProjectNonneg, Examples) {
  EXPECT_EQ(project_nonneg(col({-1.0, 2.0})), col({0.0, 2.0}));
  const MatrixXd pos = col({0.0, 0.3, 5.0});
  EXPECT_EQ(project_nonneg(pos), pos);
  const double z = project_nonneg(col({-0.0}))(0, 0);
  EXPECT_EQ(z, 0.0);
  EXPECT_FALSE(std::signbit(z));
}

TEST(ProjectSumToOne, Examples) {
  const MatrixXd a = project_sum_to_one(col({0.2, 0.2, 0.2}));
  for (Index i = 0; i < 3; ++i) EXPECT_NEAR(a(i, 0), 1.0 / 3.0, 1e-15);
  EXPECT_EQ(project_sum_to_one(col({1.0, 0.0, 0.0})), col({1.0, 0.0, 0.0}));
  EXPECT_EQ(project_sum_to_one(col({0.0, 0.0})), col({0.5, 0.5}));
}

TEST(ProjectSumToOne, IdempotentAndMatchesLagrangeForm) {
  const MatrixXd V = oracle::random_matrix(5, 40, 21, -2.0, 2.0);
  const MatrixXd P = project_sum_to_one(V);
  for (Index n = 0; n < V.cols(); ++n) {
    EXPECT_NEAR(P.col(n).sum(), 1.0, 1e-12);
    EXPECT_LT((P.col(n) - oracle::lagrange_sum_to_one(V.col(n))).cwiseAbs().maxCoeff(), 1e-12);
  }
  EXPECT_LT((project_sum_to_one(P) - P).cwiseAbs().maxCoeff(), 1e-14);
}

// Each operator against brute-force minimization of its defining objective.
TEST(ProxOracle, L1MatchesGoldenSection) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  std::uniform_real_distribution<double> t(0.0, 1.5);
  for (int i = 0; i < 50; ++i) {
    const double v = u(rng);
    const double tau = t(rng);
    const double ref = oracle::golden_section(
        [&](double x) { return 0.5 * (x - v) * (x - v) + tau * std::abs(x); }, -10.0, 10.0);
    EXPECT_NEAR(prox_l1(col({v}), tau)(0, 0), ref, 1e-6);
  }
}

TEST(ProxOracle, NonnegMatchesGoldenSection) {
  std::mt19937_64 rng(32);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int i = 0; i < 50; ++i) {
    const double v = u(rng);
    const double ref = oracle::golden_section([&](double x) { return (x - v) * (x - v); }, 0.0, 10.0);
    EXPECT_NEAR(project_nonneg(col({v}))(0, 0), ref, 1e-6);
  }
}

TEST(ProxOracle, L21MatchesPolarSearch) {
  std::mt19937_64 rng(33);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  std::uniform_real_distribution<double> t(0.0, 3.0);
  for (int i = 0; i < 50; ++i) {
    const Eigen::Vector2d v(u(rng), u(rng));
    const double tau = t(rng);
    const auto ref = oracle::polar_minimize(
        [&](const Eigen::Vector2d& x) { return 0.5 * (x - v).squaredNorm() + tau * x.norm(); },
        v.norm() + 1.0);
    const MatrixXd got = prox_l21(v, tau);
    EXPECT_LT((got.col(0) - ref).norm(), 1e-6) << "v=" << v.transpose() << " tau=" << tau;
  }
}

TEST(ProxOracle, SumToOneMatchesGradientDescent) {
  for (int i = 0; i < 50; ++i) {
    const VectorXd v = oracle::random_matrix(3, 1, 400 + i, -2.0, 2.0).col(0);
    const VectorXd ref = oracle::gd_sum_to_one(v);
    EXPECT_LT((project_sum_to_one(v).col(0) - ref).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(ProxOracle, QuadraticMatchesGradientDescent) {
  for (int i = 0; i < 50; ++i) {
    const MatrixXd S = oracle::random_matrix(6, 3, 500 + i);
    const VectorXd y = oracle::random_matrix(6, 1, 600 + i).col(0);
    const VectorXd v = oracle::random_matrix(3, 1, 700 + i).col(0);
    const double mu = 0.1 + 0.05 * i;
    const VectorXd ref = oracle::gd_quadratic_prox(v, y, S, mu);
    EXPECT_LT((prox_quadratic(v, y, S, mu).col(0) - ref).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(ProxProperties, AllOperatorsAreNonExpansive) {
  const MatrixXd S = oracle::random_matrix(9, 4, 41);
  const MatrixXd Y = oracle::random_matrix(9, 1, 42);
  for (int i = 0; i < 100; ++i) {
    const MatrixXd x = oracle::random_matrix(4, 1, 1000 + 2 * i, -3.0, 3.0);
    const MatrixXd y = oracle::random_matrix(4, 1, 1001 + 2 * i, -3.0, 3.0);
    const double d = (x - y).norm() + 1e-12;
    EXPECT_LE((prox_l1(x, 0.4) - prox_l1(y, 0.4)).norm(), d);
    EXPECT_LE((prox_l21(x, 0.9) - prox_l21(y, 0.9)).norm(), d);
    EXPECT_LE((project_nonneg(x) - project_nonneg(y)).norm(), d);
    EXPECT_LE((project_sum_to_one(x) - project_sum_to_one(y)).norm(), d);
    EXPECT_LE((prox_quadratic(x, Y, S, 0.3) - prox_quadratic(y, Y, S, 0.3)).norm(), d);
  }
}

TEST(ComputeResiduals, ZeroAtConsensus) {
  const auto problem = small_problem(10, 3, 2, 4, 51);
  SolverState st;
  st.Z = oracle::random_matrix(5, 4, 52);
  st.mu = 0.3;
  for (const auto& term : problem.terms()) st.U.push_back(problem.select(term.selection, st.Z));
  const auto res = compute_residuals(st, problem, st.U);
  EXPECT_EQ(res.primal, 0.0);
  EXPECT_EQ(res.dual, 0.0);
}

TEST(ComputeResiduals, PerturbationGivesItsNorm) {
  const auto problem = small_problem(10, 3, 2, 4, 53);
  SolverState st;
  st.Z = oracle::random_matrix(5, 4, 54);
  st.mu = 0.3;
  for (const auto& term : problem.terms()) st.U.push_back(problem.select(term.selection, st.Z));
  const auto prev = st.U;
  const MatrixXd E = oracle::random_matrix(st.U[2].rows(), st.U[2].cols(), 55);
  st.U[2] += E;
  const auto res = compute_residuals(st, problem, st.U);
  EXPECT_NEAR(res.primal, E.norm(), 1e-12);
  const auto res2 = compute_residuals(st, problem, prev);
  EXPECT_NEAR(res2.dual, 0.3 * E.norm(), 1e-12);
}

TEST(ComputeResiduals, MatchesNaiveLoopSeed5) {
  const Index R = 3, D = 2, N = 4;
  const auto problem = small_problem(10, R, D, N, 5);
  SolverState st;
  st.Z = oracle::random_matrix(R + D, N, 56);
  st.mu = 0.7;
  std::vector<MatrixXd> prev;
  for (std::size_t j = 0; j < problem.terms().size(); ++j) {
    const auto sel = problem.terms()[j].selection;
    const Index rows = sel == Selection::Identity ? R + D : (sel == Selection::AbundanceRows ? R : D);
    st.U.push_back(oracle::random_matrix(rows, N, 60 + j));
    prev.push_back(oracle::random_matrix(rows, N, 70 + j));
  }
  double p = 0.0, d = 0.0;
  for (std::size_t j = 0; j < st.U.size(); ++j) {
    const auto sel = problem.terms()[j].selection;
    const Index offset = sel == Selection::ResidualRows ? R : 0;
    for (Index i = 0; i < st.U[j].rows(); ++i) {
      for (Index n = 0; n < N; ++n) {
        const double hz = st.Z(offset + i, n);
        p += (hz - st.U[j](i, n)) * (hz - st.U[j](i, n));
        d += (st.U[j](i, n) - prev[j](i, n)) * (st.U[j](i, n) - prev[j](i, n));
      }
    }
  }
  const auto res = compute_residuals(st, problem, prev);
  EXPECT_NEAR(res.primal, std::sqrt(p), 1e-12);
  EXPECT_NEAR(res.dual, 0.7 * std::sqrt(d), 1e-12);
}

TEST(AdaptPenalty, Examples) {
  SolverOptions opts;
  auto up = adapt_penalty(1.0, 100.0, 1.0, opts);
  EXPECT_EQ(up.mu, 2.0);
  EXPECT_EQ(up.rescale, 0.5);
  auto down = adapt_penalty(1.0, 1.0, 100.0, opts);
  EXPECT_EQ(down.mu, 0.5);
  EXPECT_EQ(down.rescale, 2.0);
  auto same = adapt_penalty(1.0, 1.0, 1.0, opts);
  EXPECT_EQ(same.mu, 1.0);
  EXPECT_EQ(same.rescale, 1.0);
}

TEST(SplitProblem, GramDiagonalCountsCoveringTerms) {
  const auto p = small_problem(10, 3, 4, 2, 81);
  const VectorXd g = p.gram_diagonal();
  ASSERT_EQ(g.size(), 7);
  for (Index i = 0; i < 3; ++i) EXPECT_EQ(g(i), 3.0);
  for (Index i = 3; i < 7; ++i) EXPECT_EQ(g(i), 4.0);
}

TEST(SplitProblem, RejectsMalformedTermLists) {
  const MatrixXd S = oracle::random_matrix(6, 3, 82);
  const MatrixXd Y = oracle::random_matrix(6, 2, 83);
  EXPECT_THROW(SplitProblem(2, 1, {{NonNegTerm{}, Selection::Identity}}), ArgumentError);
  EXPECT_THROW(SplitProblem(2, 1,
                            {{QuadraticTerm(Y, S), Selection::Identity},
                             {QuadraticTerm(Y, S), Selection::Identity}}),
               ArgumentError);
  EXPECT_THROW(SplitProblem(2, 1, {{QuadraticTerm(Y, S), Selection::AbundanceRows}}), ArgumentError);
  EXPECT_THROW(SplitProblem(2, 1,
                            {{QuadraticTerm(Y, S), Selection::Identity},
                             {L1Term{-0.1}, Selection::ResidualRows}}),
               ArgumentError);
  EXPECT_THROW(SplitProblem(3, 1, {{QuadraticTerm(Y, S), Selection::Identity}}), ArgumentError);
}

TEST(Solve, QuadraticOnlyIsLeastSquares) {
  const MatrixXd S = oracle::random_matrix(12, 4, 91);
  const MatrixXd Y = oracle::random_matrix(12, 5, 92);
  SplitProblem p(2, 2, {{QuadraticTerm(Y, S), Selection::Identity}});
  SolverOptions opts;
  opts.tol = 1e-10;
  opts.max_iter = 20000;
  const auto out = solve(p, opts);
  EXPECT_TRUE(out.report.converged);
  const MatrixXd ls = (S.transpose() * S).ldlt().solve(S.transpose() * Y);
  EXPECT_LT((out.state.Z - ls).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Solve, IterationCapIsReportedNotThrown) {
  const auto p = small_problem(20, 3, 3, 10, 93);
  SolverOptions opts;
  opts.max_iter = 3;
  opts.tol = 1e-14;
  const auto out = solve(p, opts);
  EXPECT_FALSE(out.report.converged);
  EXPECT_EQ(out.report.iterations, 3);
  EXPECT_LE(out.report.iterations, opts.max_iter);
}

TEST(Solve, FixedPenaltyIsBitDeterministic) {
  const auto p = small_problem(20, 3, 3, 10, 94);
  SolverOptions opts;
  opts.adapt = false;
  opts.record_history = true;
  opts.max_iter = 300;
  const auto a = solve(p, opts);
  const auto b = solve(p, opts);
  ASSERT_EQ(a.state.history.size(), b.state.history.size());
  for (std::size_t i = 0; i < a.state.history.size(); ++i) {
    EXPECT_EQ(a.state.history[i].primal, b.state.history[i].primal);
    EXPECT_EQ(a.state.history[i].dual, b.state.history[i].dual);
    EXPECT_EQ(a.state.history[i].objective, b.state.history[i].objective);
  }
  EXPECT_TRUE((a.state.Z.array() == b.state.Z.array()).all());
}

TEST(Solve, ObjectiveNotAboveInitialPoint) {
  const auto p = small_problem(25, 3, 4, 12, 95);
  const auto out = solve(p, SolverOptions{});
  EXPECT_TRUE(out.report.converged);
  EXPECT_LE(p.objective(out.state.Z), p.objective(default_initial_point(p)) + 1e-9);
}

TEST(Solve, ConvergedMeansResidualsBelowThreshold) {
  const auto p = small_problem(25, 3, 4, 12, 96);
  const auto out = solve(p, SolverOptions{});
  ASSERT_TRUE(out.report.converged);
  EXPECT_LT(out.report.primal_res, out.report.threshold);
  EXPECT_LT(out.report.dual_res, out.report.threshold);
  EXPECT_DOUBLE_EQ(out.report.threshold, 1e-4 * std::sqrt(7.0 * 12.0));
}

TEST(Solve, EitherRuleStopsNoLaterThanBoth) {
  const auto p = small_problem(25, 3, 4, 12, 97);
  SolverOptions both;
  SolverOptions either;
  either.stop_rule = StopRule::Either;
  EXPECT_LE(solve(p, either).report.iterations, solve(p, both).report.iterations);
}

TEST(Solve, RejectsBadInitialPoint) {
  const auto p = small_problem(10, 3, 2, 4, 98);
  EXPECT_THROW(solve(p, SolverOptions{}, MatrixXd::Zero(2, 2)), ArgumentError);
  MatrixXd z = default_initial_point(p);
  z(0, 0) = std::nan("");
  EXPECT_THROW(solve(p, SolverOptions{}, z), NumericError);
  SolverOptions bad;
  bad.mu0 = 0.0;
  EXPECT_THROW(solve(p, bad), ArgumentError);
}

TEST(History, CsvHasHeaderAndOneRowPerIteration) {
  const auto p = small_problem(10, 3, 2, 4, 99);
  SolverOptions opts;
  opts.record_history = true;
  const auto out = solve(p, opts);
  std::ostringstream os;
  write_history_csv(os, out.state.history);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "iter,primal,dual,mu,objective");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  EXPECT_EQ(rows, out.report.iterations);
}

TEST(Solve, PerIterationCostIsLinearInPixels) {
  auto time_run = [](Index N) {
    const auto p = small_problem(60, 3, 6, N, 100);
    SolverOptions opts;
    opts.tol = 0.0;
    opts.max_iter = 60;
    opts.adapt = false;
    double best = 1e300;
    for (int rep = 0; rep < 5; ++rep) {
      const auto t0 = std::chrono::steady_clock::now();
      solve(p, opts);
      best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    return best;
  };
  const double t1 = time_run(3000);
  const double t2 = time_run(6000);
  const double ratio = t2 / t1;
  EXPECT_GT(ratio, 1.4);
  EXPECT_LT(ratio, 2.6);
}
