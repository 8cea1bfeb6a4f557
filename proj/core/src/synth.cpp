#include "hsu/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "hsu/errors.hpp"
#include "hsu/io.hpp"

namespace hsu::synth {

namespace {

enum Stream : std::uint64_t {
  kLabels = 1,
  kAbundances = 2,
  kMixing = 3,
  kNoise = 4,
  kEndmembers = 5,
};

double resolve_corr_len(double corr_len, Index bands) {
  return corr_len > 0.0 ? corr_len : static_cast<double>(bands) / 20.0;
}

VectorXd standard_normal(Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  VectorXd v(n);
  for (Index i = 0; i < n; ++i) v(i) = normal(rng);
  return v;
}

double spectral_angle(const VectorXd& a, const VectorXd& b) {
  const double c = std::clamp(a.dot(b) / (a.norm() * b.norm()), -1.0, 1.0);
  return std::acos(c);
}

}  // namespace

std::string class_name(const ClassModel& model) {
  struct Namer {
    std::string operator()(const Lmm&) const { return "LMM"; }
    std::string operator()(const Nlk& m) const { return "NL-" + std::to_string(m.order); }
    std::string operator()(const Gbm&) const { return "GBM"; }
    std::string operator()(const Ppnmm&) const { return "PPNMM"; }
    std::string operator()(const Ev&) const { return "EV"; }
    std::string operator()(const Me&) const { return "ME"; }
  };
  return std::visit(Namer{}, model);
}

void SceneSpec::validate() const {
  if (rows < 1 || cols < 1) throw ArgumentError("SceneSpec: rows and cols must be >= 1");
  if (bands < 8) throw ArgumentError("SceneSpec: need at least 8 bands");
  if (endmembers < 2) throw ArgumentError("SceneSpec: need at least 2 endmembers");
  if (classes.empty()) throw ArgumentError("SceneSpec: at least one class model is required");
  if (classes.size() > 255) throw ArgumentError("SceneSpec: at most 255 classes");
  if (!std::isfinite(snr_db)) throw ArgumentError("SceneSpec: snr_db must be finite");
  if (!std::isfinite(beta)) throw ArgumentError("SceneSpec: beta must be finite");
  if (potts_sweeps < 1) throw ArgumentError("SceneSpec: potts_sweeps must be >= 1");
  for (const auto& c : classes) {
    if (const auto* n = std::get_if<Nlk>(&c)) {
      if (n->order < 2 || !(n->gamma_sigma2 > 0.0)) {
        throw ArgumentError("SceneSpec: NL-K needs K >= 2 and a positive variance");
      }
    } else if (const auto* g = std::get_if<Gbm>(&c)) {
      if (!(0.0 <= g->coeff_lo && g->coeff_lo <= g->coeff_hi && g->coeff_hi <= 1.0)) {
        throw ArgumentError("SceneSpec: GBM needs 0 <= coeff_lo <= coeff_hi <= 1");
      }
    } else if (const auto* p = std::get_if<Ppnmm>(&c)) {
      if (!(p->b >= 0.0)) throw ArgumentError("SceneSpec: PPNMM b must be >= 0");
    } else if (const auto* e = std::get_if<Ev>(&c)) {
      if (!(e->eps2 > 0.0)) throw ArgumentError("SceneSpec: EV eps2 must be > 0");
    } else if (const auto* m = std::get_if<Me>(&c)) {
      if (!(m->eps2 > 0.0)) throw ArgumentError("SceneSpec: ME eps2 must be > 0");
    }
  }
  if (endmember_spectra) {
    if (endmember_spectra->rows() != bands || endmember_spectra->cols() != endmembers) {
      throw ArgumentError("SceneSpec: supplied endmembers do not match bands x endmembers");
    }
  }
}

SceneSpec preset_i1(int endmembers, std::uint64_t seed) {
  SceneSpec s;
  s.endmembers = endmembers;
  s.seed = seed;
  s.classes = {Lmm{}, Nlk{3, 0.1}, Gbm{0.8, 1.0}, Ppnmm{0.5}};
  return s;
}

SceneSpec preset_i2(int endmembers, std::uint64_t seed) {
  SceneSpec s;
  s.endmembers = endmembers;
  s.seed = seed;
  s.classes = {Lmm{}, Ev{0.001, 0.0}, Me{0.002, 0.0}};
  return s;
}

Eigen::VectorXi GroundTruth::pixel_labels() const {
  Eigen::VectorXi out(labels.size());
  for (Index i = 0; i < labels.rows(); ++i) {
    for (Index j = 0; j < labels.cols(); ++j) out(i * labels.cols() + j) = labels(i, j);
  }
  return out;
}

std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

Eigen::MatrixXi sample_potts_labels(Index rows, Index cols, int n_classes, double beta,
                                    int sweeps, std::uint64_t seed) {
  if (n_classes < 2) throw ArgumentError("sample_potts_labels: need at least 2 classes");
  if (sweeps < 1) throw ArgumentError("sample_potts_labels: sweeps must be >= 1");
  if (rows < 1 || cols < 1) throw ArgumentError("sample_potts_labels: empty lattice");

  auto rng = make_stream(seed, kLabels, 0);
  std::uniform_int_distribution<int> pick(0, n_classes - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Eigen::MatrixXi labels(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) labels(i, j) = pick(rng);
  }

  std::vector<double> weight(static_cast<std::size_t>(n_classes));
  std::vector<int> count(static_cast<std::size_t>(n_classes));
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    for (Index parity = 0; parity < 2; ++parity) {
      for (Index i = 0; i < rows; ++i) {
        for (Index j = (i + parity) % 2; j < cols; j += 2) {
          std::fill(count.begin(), count.end(), 0);
          if (i > 0) ++count[static_cast<std::size_t>(labels(i - 1, j))];
          if (i + 1 < rows) ++count[static_cast<std::size_t>(labels(i + 1, j))];
          if (j > 0) ++count[static_cast<std::size_t>(labels(i, j - 1))];
          if (j + 1 < cols) ++count[static_cast<std::size_t>(labels(i, j + 1))];
          double total = 0.0;
          for (int c = 0; c < n_classes; ++c) {
            weight[static_cast<std::size_t>(c)] = std::exp(beta * count[static_cast<std::size_t>(c)]);
            total += weight[static_cast<std::size_t>(c)];
          }
          double u = unit(rng) * total;
          int chosen = n_classes - 1;
          for (int c = 0; c < n_classes; ++c) {
            u -= weight[static_cast<std::size_t>(c)];
            if (u < 0.0) {
              chosen = c;
              break;
            }
          }
          labels(i, j) = chosen;
        }
      }
    }
  }
  return labels;
}

AbundanceMatrix sample_abundances(Index pixels, int endmembers, std::uint64_t seed) {
  if (endmembers < 2) throw ArgumentError("sample_abundances: need at least 2 endmembers");
  if (pixels < 0) throw ArgumentError("sample_abundances: negative pixel count");
  MatrixXd A(endmembers, pixels);
  std::exponential_distribution<double> expo(1.0);
  for (Index n = 0; n < pixels; ++n) {
    auto rng = make_stream(seed, kAbundances, static_cast<std::uint64_t>(n));
    for (int r = 0; r < endmembers; ++r) A(r, n) = expo(rng);
    A.col(n) /= A.col(n).sum();
  }
  return AbundanceMatrix(std::move(A));
}

EndmemberMatrix generate_endmembers(Index bands, int endmembers, std::uint64_t seed) {
  if (bands < 8) throw ArgumentError("generate_endmembers: need at least 8 bands");
  if (endmembers < 2) throw ArgumentError("generate_endmembers: need at least 2 endmembers");
  const double min_angle = 5.0 * std::numbers::pi / 180.0;
  const double L = static_cast<double>(bands);

  for (std::uint64_t attempt = 0; attempt < 100; ++attempt) {
    auto rng = make_stream(seed, kEndmembers, attempt);
    std::uniform_int_distribution<int> bump_count(3, 6);
    std::uniform_real_distribution<double> center(0.0, L - 1.0);
    std::uniform_real_distribution<double> width(L / 40.0, L / 6.0);
    std::uniform_real_distribution<double> amplitude(0.1, 0.6);
    std::uniform_real_distribution<double> baseline(0.05, 0.3);

    MatrixXd M(bands, endmembers);
    for (int r = 0; r < endmembers; ++r) {
      VectorXd s = VectorXd::Constant(bands, baseline(rng));
      const int bumps = bump_count(rng);
      for (int b = 0; b < bumps; ++b) {
        const double c = center(rng);
        const double w = width(rng);
        const double a = amplitude(rng);
        for (Index l = 0; l < bands; ++l) {
          const double t = (static_cast<double>(l) - c) / w;
          s(l) += a * std::exp(-0.5 * t * t);
        }
      }
      M.col(r) = s.cwiseMax(0.01).cwiseMin(1.0);
    }

    bool separated = true;
    for (int i = 0; i < endmembers && separated; ++i) {
      for (int j = i + 1; j < endmembers; ++j) {
        if (spectral_angle(M.col(i), M.col(j)) < min_angle) {
          separated = false;
          break;
        }
      }
    }
    if (separated) return EndmemberMatrix(std::move(M));
  }
  throw ArgumentError("generate_endmembers: could not reach a 5 degree pairwise angle in 100 attempts");
}

EndmemberMatrix load_endmembers(const std::filesystem::path& path) {
  MatrixXd m = io::read_matrix_csv(path);
  if (m.rows() < 2 || m.cols() < 2) {
    throw FormatError(path.string() + ": endmember CSV needs >= 2 bands and >= 2 columns");
  }
  if (!m.allFinite()) throw FormatError(path.string() + ": non-finite endmember values");
  if ((m.array() < 0.0).any()) throw FormatError(path.string() + ": negative endmember values");
  try {
    return EndmemberMatrix(std::move(m));
  } catch (const ArgumentError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

MatrixXd se_covariance(Index bands, double corr_len, double jitter) {
  if (!(corr_len > 0.0)) throw ArgumentError("se_covariance: corr_len must be > 0");
  if (bands < 1) throw ArgumentError("se_covariance: bands must be >= 1");
  MatrixXd S(bands, bands);
  const double denom = 2.0 * corr_len * corr_len;
  for (Index i = 0; i < bands; ++i) {
    for (Index j = 0; j < bands; ++j) {
      const double d = static_cast<double>(i - j);
      S(i, j) = std::exp(-d * d / denom);
    }
  }
  S.diagonal().array() += jitter;
  return S;
}

PixelMixer::PixelMixer(const EndmemberMatrix& M, const std::vector<ClassModel>& classes)
    : M_(M.data()), classes_(classes), chol_(classes.size()) {
  const Index L = M.bands();
  for (std::size_t c = 0; c < classes_.size(); ++c) {
    const auto& model = classes_[c];
    if (const auto* n = std::get_if<Nlk>(&model)) {
      if (!interactions_.contains(n->order)) {
        interactions_.emplace(n->order, build_interaction_matrix(M, n->order).Q);
      }
    }
    double eps2 = 0.0;
    double corr = 0.0;
    if (const auto* e = std::get_if<Ev>(&model)) {
      eps2 = e->eps2;
      corr = e->corr_len;
    } else if (const auto* m = std::get_if<Me>(&model)) {
      eps2 = m->eps2;
      corr = m->corr_len;
    }
    if (eps2 > 0.0) {
      Eigen::LLT<MatrixXd> llt(eps2 * se_covariance(L, resolve_corr_len(corr, L)));
      if (llt.info() != Eigen::Success) {
        throw NumericError("PixelMixer: covariance factorization failed");
      }
      chol_[c] = llt.matrixL();
    }
  }
}

MixedPixel PixelMixer::mix(std::size_t class_index, const VectorXd& a,
                           std::mt19937_64& rng) const {
  if (class_index >= classes_.size()) throw ArgumentError("PixelMixer::mix: class out of range");
  if (a.size() != M_.cols()) throw ArgumentError("PixelMixer::mix: abundance length mismatch");
  const Index L = M_.rows();
  const Index R = M_.cols();
  const VectorXd linear = M_ * a;
  VectorXd residual = VectorXd::Zero(L);

  const auto& model = classes_[class_index];
  if (const auto* n = std::get_if<Nlk>(&model)) {
    const MatrixXd& Q = interactions_.at(n->order);
    std::normal_distribution<double> normal(0.0, std::sqrt(n->gamma_sigma2));
    VectorXd gamma(Q.cols());
    for (Index d = 0; d < gamma.size(); ++d) {
      double g = normal(rng);
      while (g < 0.0) g = normal(rng);
      gamma(d) = g;
    }
    residual = Q * gamma;
  } else if (const auto* g = std::get_if<Gbm>(&model)) {
    std::uniform_real_distribution<double> coeff(g->coeff_lo, g->coeff_hi);
    for (Index i = 0; i < R; ++i) {
      for (Index j = i + 1; j < R; ++j) {
        const double c = coeff(rng) * a(i) * a(j);
        residual.array() += c * M_.col(i).array() * M_.col(j).array();
      }
    }
  } else if (const auto* p = std::get_if<Ppnmm>(&model)) {
    residual = p->b * linear.cwiseProduct(linear);
  } else if (std::holds_alternative<Ev>(model)) {
    const MatrixXd& Lc = chol_[class_index];
    for (Index r = 0; r < R; ++r) {
      residual.noalias() += a(r) * (Lc * standard_normal(L, rng));
    }
  } else if (std::holds_alternative<Me>(model)) {
    residual = chol_[class_index] * standard_normal(L, rng);
  }
  return {linear + residual, residual};
}

MixedPixel mix_pixel(const ClassModel& kind, const EndmemberMatrix& M, const VectorXd& a,
                     std::mt19937_64& rng) {
  return PixelMixer(M, {kind}).mix(0, a, rng);
}

NoisyCube add_noise(const MatrixXd& clean, double snr_db, std::uint64_t seed) {
  const double energy = clean.squaredNorm();
  if (!(energy > 0.0)) throw ArgumentError("add_noise: clean cube has zero energy");
  const double sigma2 =
      energy / (static_cast<double>(clean.size()) * std::pow(10.0, snr_db / 10.0));
  const double sigma = std::sqrt(sigma2);
  NoisyCube out{clean, sigma2};
  for (Index n = 0; n < clean.cols(); ++n) {
    auto rng = make_stream(seed, kNoise, static_cast<std::uint64_t>(n));
    std::normal_distribution<double> normal(0.0, sigma);
    for (Index l = 0; l < clean.rows(); ++l) out.noisy(l, n) += normal(rng);
  }
  return out;
}

GroundTruth build_scene(const SceneSpec& spec) {
  spec.validate();
  const Index N = spec.rows * spec.cols;
  const int C = static_cast<int>(spec.classes.size());

  EndmemberMatrix M = spec.endmember_spectra
                          ? EndmemberMatrix(*spec.endmember_spectra)
                          : generate_endmembers(spec.bands, spec.endmembers, spec.seed);

  Eigen::MatrixXi labels = (C >= 2) ? sample_potts_labels(spec.rows, spec.cols, C, spec.beta,
                                                          spec.potts_sweeps, spec.seed)
                                    : Eigen::MatrixXi::Zero(spec.rows, spec.cols);
  AbundanceMatrix A = sample_abundances(N, spec.endmembers, spec.seed);

  PixelMixer mixer(M, spec.classes);
  MatrixXd clean(spec.bands, N);
  MatrixXd residual(spec.bands, N);
  for (Index n = 0; n < N; ++n) {
    auto rng = make_stream(spec.seed, kMixing, static_cast<std::uint64_t>(n));
    const auto label = static_cast<std::size_t>(labels(n / spec.cols, n % spec.cols));
    MixedPixel px = mixer.mix(label, A.data().col(n), rng);
    clean.col(n) = std::move(px.spectrum);
    residual.col(n) = std::move(px.residual);
  }

  NoisyCube noisy = add_noise(clean, spec.snr_db, spec.seed);
  return GroundTruth{std::move(labels),
                     std::move(M),
                     std::move(A),
                     SpectralCube(std::move(clean), spec.rows, spec.cols),
                     SpectralCube(std::move(noisy.noisy), spec.rows, spec.cols),
                     noisy.sigma2,
                     std::move(residual)};
}

}  // namespace hsu::synth
