#pragma once

// Synthetic scenes with ground truth: a Potts label field assigns each
// pixel a mixing model, abundances are uniform on the simplex, and i.i.d.
// Gaussian noise is calibrated to a target SNR.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "hsu/model.hpp"

namespace hsu::synth {

struct Lmm {};
/// Q^(order) gamma with gamma ~ N+(0, gamma_sigma2 I).
struct Nlk {
  int order = 3;
  double gamma_sigma2 = 0.1;
};
/// sum_{i<j} g_ij a_i a_j m_i.m_j with g_ij ~ U[coeff_lo, coeff_hi].
struct Gbm {
  double coeff_lo = 0.8;
  double coeff_hi = 1.0;
};
/// b (M a).(M a).
struct Ppnmm {
  double b = 0.5;
};
/// Per-pixel endmember perturbations p_r ~ N(0, eps2 Sigma_p).
/// corr_len <= 0 selects the default L / 20.
struct Ev {
  double eps2 = 0.001;
  double corr_len = 0.0;
};
/// Smooth residual ~ N(0, eps2 Sigma_p).
struct Me {
  double eps2 = 0.002;
  double corr_len = 0.0;
};

using ClassModel = std::variant<Lmm, Nlk, Gbm, Ppnmm, Ev, Me>;

std::string class_name(const ClassModel& model);

struct SceneSpec {
  Index rows = 100;
  Index cols = 100;
  Index bands = 207;
  int endmembers = 3;
  std::vector<ClassModel> classes;
  double beta = 0.8;
  int potts_sweeps = 100;
  double snr_db = 25.0;
  std::uint64_t seed = 1;
  /// Used instead of generated spectra when set (bands must match).
  std::optional<MatrixXd> endmember_spectra;

  void validate() const;
};

/// 100x100, L=207, classes LMM / NL-3 / GBM / PPNMM, beta 0.8, 25 dB.
SceneSpec preset_i1(int endmembers, std::uint64_t seed);
/// 100x100, L=207, classes LMM / EV / ME, beta 0.8, 25 dB.
SceneSpec preset_i2(int endmembers, std::uint64_t seed);

struct GroundTruth {
  /// rows x cols class indices into SceneSpec::classes.
  Eigen::MatrixXi labels;
  EndmemberMatrix endmembers;
  AbundanceMatrix abundances;
  SpectralCube clean;
  SpectralCube noisy;
  double sigma2 = 0.0;
  /// Column n is y_clean_n - M a_n.
  MatrixXd residual;

  /// Labels flattened in pixel order.
  Eigen::VectorXi pixel_labels() const;
};

/// Independent RNG stream for (seed, stream, index).
std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

/// Checkerboard Gibbs sampling of a 4-neighbour Potts field,
/// p(c) ~ exp(beta * #{neighbours == c}), from a uniform random start.
Eigen::MatrixXi sample_potts_labels(Index rows, Index cols, int n_classes, double beta,
                                    int sweeps, std::uint64_t seed);

/// Columns uniform on the simplex (normalized exponentials).
AbundanceMatrix sample_abundances(Index pixels, int endmembers, std::uint64_t seed);

/// Smooth positive spectra in [0.01, 1] with pairwise angles >= 5 degrees.
EndmemberMatrix generate_endmembers(Index bands, int endmembers, std::uint64_t seed);

/// Reads an L-row, R-column CSV. Throws FormatError on malformed or
/// negative input.
EndmemberMatrix load_endmembers(const std::filesystem::path& path);

/// exp(-(i-j)^2 / (2 corr_len^2)) plus `jitter` on the diagonal.
MatrixXd se_covariance(Index bands, double corr_len, double jitter = 1e-10);

struct MixedPixel {
  VectorXd spectrum;
  VectorXd residual;
};

/// Precomputes what the class models need (interaction dictionaries,
/// covariance factors) for one endmember matrix.
class PixelMixer {
 public:
  PixelMixer(const EndmemberMatrix& M, const std::vector<ClassModel>& classes);

  MixedPixel mix(std::size_t class_index, const VectorXd& a, std::mt19937_64& rng) const;

 private:
  MatrixXd M_;
  std::vector<ClassModel> classes_;
  std::map<int, MatrixXd> interactions_;
  std::vector<MatrixXd> chol_;  // per class; empty when unused
};

MixedPixel mix_pixel(const ClassModel& kind, const EndmemberMatrix& M, const VectorXd& a,
                     std::mt19937_64& rng);

struct NoisyCube {
  MatrixXd noisy;
  double sigma2 = 0.0;
};

/// sigma^2 = ||clean||^2 / (L N 10^{snr/10}); each pixel draws from its own
/// stream. Throws ArgumentError for a zero-energy cube.
NoisyCube add_noise(const MatrixXd& clean, double snr_db, std::uint64_t seed);

GroundTruth build_scene(const SceneSpec& spec);

}  // namespace hsu::synth
