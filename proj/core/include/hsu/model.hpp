#pragma once

// Mixture-model data types, dictionaries and the forward model
//   y_n = M a_n + P x_n
// where P is either the interaction dictionary Q^(K) (nonlinear mixing)
// or a truncated DCT basis (smooth mismodelling residuals).

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace hsu {

using Index = Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// L x N pixel spectra, one pixel per column, with an image geometry
/// rows * cols == N. Pixel n sits at (n / cols, n % cols).
class SpectralCube {
 public:
  SpectralCube(MatrixXd data, Index rows, Index cols);
  /// Geometry defaults to a single image row of N pixels.
  explicit SpectralCube(MatrixXd data);

  const MatrixXd& data() const noexcept { return data_; }
  Index bands() const noexcept { return data_.rows(); }
  Index pixels() const noexcept { return data_.cols(); }
  Index rows() const noexcept { return rows_; }
  Index cols() const noexcept { return cols_; }

 private:
  MatrixXd data_;
  Index rows_;
  Index cols_;
};

/// L x R nonnegative endmember signatures with pairwise-distinct columns.
class EndmemberMatrix {
 public:
  explicit EndmemberMatrix(MatrixXd data);

  const MatrixXd& data() const noexcept { return data_; }
  Index bands() const noexcept { return data_.rows(); }
  Index count() const noexcept { return data_.cols(); }

 private:
  MatrixXd data_;
};

/// Exponents k_r of one interaction spectrum  prod_r m_r^{k_r}.
struct MultiIndex {
  std::vector<int> k;

  int order() const noexcept;
  bool operator==(const MultiIndex&) const = default;
};

/// Q^(K): L x D_K matrix of weighted Hadamard products of orders 2..K,
/// one MultiIndex per column.
struct InteractionDictionary {
  MatrixXd Q;
  std::vector<MultiIndex> indices;
  int max_order = 0;
  int endmembers = 0;

  Index size() const noexcept { return Q.cols(); }
};

/// L x D matrix whose columns are the first D rows of the orthonormal
/// L-point DCT-II (first column is the constant row).
struct SmoothDictionary {
  MatrixXd basis;

  Index size() const noexcept { return basis.cols(); }
};

/// R x N abundances on the probability simplex (per column).
class AbundanceMatrix {
 public:
  static constexpr double kNegativeTolerance = 1e-9;
  static constexpr double kSumTolerance = 1e-6;

  explicit AbundanceMatrix(MatrixXd data);

  const MatrixXd& data() const noexcept { return data_; }
  Index endmembers() const noexcept { return data_.rows(); }
  Index pixels() const noexcept { return data_.cols(); }

 private:
  MatrixXd data_;
};

enum class ResidualKind { Nonlinear, Mismodelling };

/// D x N residual coefficients: Gamma (nonnegative) for the nonlinear
/// model, B (unconstrained DCT coefficients) for the mismodelling model.
class ResidualCoefficients {
 public:
  ResidualCoefficients(MatrixXd data, ResidualKind kind);

  const MatrixXd& data() const noexcept { return data_; }
  ResidualKind kind() const noexcept { return kind_; }

 private:
  MatrixXd data_;
  ResidualKind kind_;
};

/// Number of interaction spectra of orders 2..K for R endmembers:
/// sum_{i=2}^{K} C(R+i-1, i). Throws ArithmeticOverflowError if the
/// count does not fit in 64 bits.
std::int64_t count_interactions(int endmembers, int max_order);

/// Canonical column ordering of Q^(K): ascending order i; within an order
/// the cross terms come first in descending lexicographic order of k
/// (equivalently m_12, m_13, ..., m_23, ...), then pure powers m_r^i by r.
std::vector<MultiIndex> enumerate_multi_indices(int endmembers, int max_order);

/// sqrt(i! / prod_r k_r!), the multinomial kernel weight.
double interaction_coefficient(const MultiIndex& idx);

inline constexpr std::size_t kDefaultDictionaryCapBytes = std::size_t{2} << 30;

InteractionDictionary build_interaction_matrix(
    const EndmemberMatrix& M, int max_order,
    std::size_t cap_bytes = kDefaultDictionaryCapBytes);

SmoothDictionary build_dct_dictionary(Index bands, Index size);

/// [M, P] Z. P may have zero columns, in which case this is M A.
MatrixXd predict(const EndmemberMatrix& M, const MatrixXd& P,
                 const MatrixXd& Z);

}  // namespace hsu
