#include "hsu/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

#include "hsu/errors.hpp"

namespace hsu {

namespace {

void require_finite(const MatrixXd& m, const char* what) {
  if (!m.allFinite()) {
    throw ArgumentError(std::string(what) + ": entries must be finite");
  }
}

// Appends every composition of `total` into `parts` nonnegative integers,
// in descending lexicographic order.
void compositions(int total, int parts, std::vector<int>& prefix,
                  std::vector<std::vector<int>>& out) {
  if (parts == 1) {
    prefix.push_back(total);
    out.push_back(prefix);
    prefix.pop_back();
    return;
  }
  for (int first = total; first >= 0; --first) {
    prefix.push_back(first);
    compositions(total - first, parts - 1, prefix, out);
    prefix.pop_back();
  }
}

}  // namespace

SpectralCube::SpectralCube(MatrixXd data, Index rows, Index cols)
    : data_(std::move(data)), rows_(rows), cols_(cols) {
  if (data_.rows() < 2) throw ArgumentError("SpectralCube: need at least 2 bands");
  if (data_.cols() < 1) throw ArgumentError("SpectralCube: need at least 1 pixel");
  if (rows_ < 1 || cols_ < 1 || rows_ * cols_ != data_.cols()) {
    throw ArgumentError("SpectralCube: geometry " + std::to_string(rows_) + "x" +
                        std::to_string(cols_) + " does not match " +
                        std::to_string(data_.cols()) + " pixels");
  }
  require_finite(data_, "SpectralCube");
}

SpectralCube::SpectralCube(MatrixXd data)
    : SpectralCube(data, 1, data.cols()) {}

EndmemberMatrix::EndmemberMatrix(MatrixXd data) : data_(std::move(data)) {
  if (data_.cols() < 2) throw ArgumentError("EndmemberMatrix: need at least 2 endmembers");
  if (data_.rows() < 1) throw ArgumentError("EndmemberMatrix: empty spectra");
  require_finite(data_, "EndmemberMatrix");
  if ((data_.array() < 0.0).any()) {
    throw ArgumentError("EndmemberMatrix: entries must be nonnegative");
  }
  for (Index i = 0; i < data_.cols(); ++i) {
    for (Index j = i + 1; j < data_.cols(); ++j) {
      if (data_.col(i) == data_.col(j)) {
        throw ArgumentError("EndmemberMatrix: columns " + std::to_string(i) +
                            " and " + std::to_string(j) + " are identical");
      }
    }
  }
}

int MultiIndex::order() const noexcept {
  return std::accumulate(k.begin(), k.end(), 0);
}

AbundanceMatrix::AbundanceMatrix(MatrixXd data) : data_(std::move(data)) {
  require_finite(data_, "AbundanceMatrix");
  if (data_.rows() < 1) throw ArgumentError("AbundanceMatrix: no endmember rows");
  if ((data_.array() < -kNegativeTolerance).any()) {
    throw ArgumentError("AbundanceMatrix: negative abundance");
  }
  for (Index n = 0; n < data_.cols(); ++n) {
    if (std::abs(data_.col(n).sum() - 1.0) > kSumTolerance) {
      throw ArgumentError("AbundanceMatrix: column " + std::to_string(n) +
                          " does not sum to one");
    }
  }
}

ResidualCoefficients::ResidualCoefficients(MatrixXd data, ResidualKind kind)
    : data_(std::move(data)), kind_(kind) {
  require_finite(data_, "ResidualCoefficients");
  if (kind_ == ResidualKind::Nonlinear &&
      (data_.array() < -AbundanceMatrix::kNegativeTolerance).any()) {
    throw ArgumentError("ResidualCoefficients: nonlinear coefficients must be nonnegative");
  }
}

std::int64_t count_interactions(int endmembers, int max_order) {
  if (endmembers < 1) throw ArgumentError("count_interactions: R must be >= 1");
  if (max_order < 2) throw ArgumentError("count_interactions: K must be >= 2");

  using u128 = unsigned __int128;
  constexpr auto limit = static_cast<u128>(std::numeric_limits<std::int64_t>::max());
  const auto R = static_cast<u128>(endmembers);

  // C(R+i-1, i) = C(R+i-2, i-1) * (R+i-1) / i, starting from C(R, 1) = R.
  u128 term = R;
  u128 total = 0;
  for (int i = 2; i <= max_order; ++i) {
    term = term * (R + static_cast<u128>(i) - 1) / static_cast<u128>(i);
    total += term;
    if (term > limit || total > limit) {
      throw ArithmeticOverflowError("count_interactions: D_K overflows int64 for R=" +
                                    std::to_string(endmembers) +
                                    ", K=" + std::to_string(max_order));
    }
  }
  return static_cast<std::int64_t>(total);
}

std::vector<MultiIndex> enumerate_multi_indices(int endmembers, int max_order) {
  const auto total = count_interactions(endmembers, max_order);
  std::vector<MultiIndex> out;
  out.reserve(static_cast<std::size_t>(total));

  std::vector<std::vector<int>> all;
  std::vector<int> prefix;
  for (int order = 2; order <= max_order; ++order) {
    all.clear();
    compositions(order, endmembers, prefix, all);
    std::vector<MultiIndex> pure;
    for (auto& k : all) {
      const bool is_pure = std::find(k.begin(), k.end(), order) != k.end();
      if (is_pure) {
        pure.push_back({std::move(k)});
      } else {
        out.push_back({std::move(k)});
      }
    }
    // Descending lex already lists m_1^i before m_2^i.
    for (auto& p : pure) out.push_back(std::move(p));
  }
  return out;
}

double interaction_coefficient(const MultiIndex& idx) {
  // i! / prod k_r! evaluated in log space so large orders stay finite.
  const int order = idx.order();
  double log_ratio = std::lgamma(order + 1.0);
  for (int kr : idx.k) log_ratio -= std::lgamma(kr + 1.0);
  const double ratio = std::round(std::exp(log_ratio));
  return std::sqrt(ratio);
}

InteractionDictionary build_interaction_matrix(const EndmemberMatrix& M,
                                               int max_order,
                                               std::size_t cap_bytes) {
  const int R = static_cast<int>(M.count());
  const Index L = M.bands();
  const auto columns = count_interactions(R, max_order);
  const long double bytes = static_cast<long double>(L) * columns * sizeof(double);
  if (bytes > static_cast<long double>(cap_bytes)) {
    throw ResourceError("build_interaction_matrix: Q^(" + std::to_string(max_order) +
                        ") needs " + std::to_string(static_cast<unsigned long long>(bytes)) +
                        " bytes (" + std::to_string(L) + " x " + std::to_string(columns) +
                        "), cap is " + std::to_string(cap_bytes));
  }

  InteractionDictionary dict;
  dict.max_order = max_order;
  dict.endmembers = R;
  dict.indices = enumerate_multi_indices(R, max_order);
  dict.Q.resize(L, static_cast<Index>(columns));

  const MatrixXd& m = M.data();
  for (Index d = 0; d < dict.Q.cols(); ++d) {
    const auto& idx = dict.indices[static_cast<std::size_t>(d)];
    VectorXd col = VectorXd::Constant(L, interaction_coefficient(idx));
    for (int r = 0; r < R; ++r) {
      for (int p = 0; p < idx.k[static_cast<std::size_t>(r)]; ++p) {
        col.array() *= m.col(r).array();
      }
    }
    dict.Q.col(d) = col;
  }
  return dict;
}

SmoothDictionary build_dct_dictionary(Index bands, Index size) {
  if (bands < 1) throw ArgumentError("build_dct_dictionary: L must be >= 1");
  if (size < 1 || size > bands) {
    throw ArgumentError("build_dct_dictionary: need 1 <= D <= L, got D=" +
                        std::to_string(size) + ", L=" + std::to_string(bands));
  }
  SmoothDictionary dict;
  dict.basis.resize(bands, size);
  const double L = static_cast<double>(bands);
  for (Index k = 0; k < size; ++k) {
    const double scale = (k == 0) ? std::sqrt(1.0 / L) : std::sqrt(2.0 / L);
    for (Index n = 0; n < bands; ++n) {
      dict.basis(n, k) = scale * std::cos(std::numbers::pi * (2.0 * n + 1.0) *
                                          static_cast<double>(k) / (2.0 * L));
    }
  }
  return dict;
}

MatrixXd predict(const EndmemberMatrix& M, const MatrixXd& P, const MatrixXd& Z) {
  const Index R = M.count();
  const Index D = P.cols();
  if (P.cols() > 0 && P.rows() != M.bands()) {
    throw ArgumentError("predict: dictionary has " + std::to_string(P.rows()) +
                        " bands, endmembers have " + std::to_string(M.bands()));
  }
  if (Z.rows() != R + D) {
    throw ArgumentError("predict: Z has " + std::to_string(Z.rows()) +
                        " rows, expected R + D = " + std::to_string(R + D));
  }
  MatrixXd out = M.data() * Z.topRows(R);
  if (D > 0) out.noalias() += P * Z.bottomRows(D);
  return out;
}

}  // namespace hsu
