#include "commands.hpp"

#include <algorithm>
#include <fstream>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "hsu/errors.hpp"
#include "hsu/eval.hpp"
#include "hsu/io.hpp"
#include "hsu/synth.hpp"
#include "hsu/unmixers.hpp"

namespace hsu::cli {

namespace fs = std::filesystem;

namespace {

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw FormatError("cannot create output directory " + dir.string() + ": " + ec.message());
  }
}

std::string join_classes(const std::vector<synth::ClassModel>& classes) {
  std::string out;
  for (std::size_t i = 0; i < classes.size(); ++i) {
    if (i > 0) out += ',';
    out += synth::class_name(classes[i]);
  }
  return out;
}

std::string multi_index_label(const MultiIndex& idx) {
  std::string out = "k=(";
  for (std::size_t r = 0; r < idx.k.size(); ++r) {
    if (r > 0) out += ' ';
    out += std::to_string(idx.k[r]);
  }
  return out + ")";
}

admm::StopRule parse_stop_rule(const std::string& s) {
  if (s == "both") return admm::StopRule::Both;
  if (s == "either") return admm::StopRule::Either;
  throw ArgumentError("--stop-rule must be 'both' or 'either'");
}

UnmixSpec make_spec(const UnmixOptions& o) {
  UnmixSpec spec;
  if (o.method == "nusal") {
    spec = nusal_spec(o.order);
  } else if (o.method == "rusal") {
    spec = rusal_spec(o.dct_dim);
  } else if (o.method == "linear") {
    spec = linear_spec();
  } else {
    throw ArgumentError("--method must be nusal, rusal or linear");
  }
  if (o.tau1) spec.tau1 = *o.tau1;
  if (o.tau2) spec.tau2 = *o.tau2;
  spec.solver.mu0 = o.mu0;
  spec.solver.tol = o.tol;
  spec.solver.max_iter = o.max_iter;
  spec.solver.adapt = !o.no_adapt;
  spec.solver.stop_rule = parse_stop_rule(o.stop_rule);
  spec.solver.record_history = o.history;
  spec.validate();
  return spec;
}

}  // namespace

void cmd_synth(const SynthOptions& o, std::ostream& out) {
  synth::SceneSpec spec;
  if (o.preset == "i1") {
    spec = synth::preset_i1(o.endmembers, o.seed);
  } else if (o.preset == "i2") {
    spec = synth::preset_i2(o.endmembers, o.seed);
  } else {
    throw ArgumentError("--preset must be i1 or i2");
  }
  spec.rows = o.rows;
  spec.cols = o.cols;
  spec.bands = o.bands;
  spec.snr_db = o.snr_db;
  spec.beta = o.beta;
  spec.potts_sweeps = o.potts_sweeps;
  spec.validate();

  ensure_dir(o.out_dir);
  const synth::GroundTruth gt = synth::build_scene(spec);

  io::write_cube(o.out_dir / "cube.hsib", gt.noisy);
  io::write_pgm(o.out_dir / "labels.pgm", io::labels_to_gray(gt.labels));
  io::write_matrix_csv(o.out_dir / "abundances.csv", gt.abundances.data());
  io::write_matrix_csv(o.out_dir / "endmembers.csv", gt.endmembers.data());

  io::Manifest m;
  m.set("command", std::string("synth"));
  m.set("preset", o.preset);
  m.set("rows", static_cast<std::int64_t>(spec.rows));
  m.set("cols", static_cast<std::int64_t>(spec.cols));
  m.set("bands", static_cast<std::int64_t>(spec.bands));
  m.set("endmembers", spec.endmembers);
  m.set("classes", join_classes(spec.classes));
  m.set("beta", spec.beta);
  m.set("potts_sweeps", spec.potts_sweeps);
  m.set("snr_db", spec.snr_db);
  m.set("seed", std::to_string(spec.seed));
  m.set("sigma2", gt.sigma2);
  m.write(o.out_dir / "manifest.txt");

  out << "wrote scene " << spec.rows << "x" << spec.cols << "x" << spec.bands << " ("
      << join_classes(spec.classes) << ") to " << o.out_dir.string() << "\n";
}

void cmd_unmix(const UnmixOptions& o, std::ostream& out) {
  const UnmixSpec base = make_spec(o);
  const SpectralCube Y = io::read_cube(o.cube);
  const EndmemberMatrix M = synth::load_endmembers(o.endmembers);
  if (Y.bands() != M.bands()) {
    throw ArgumentError("cube has " + std::to_string(Y.bands()) + " bands but endmembers have " +
                        std::to_string(M.bands()));
  }
  std::optional<MatrixXd> truth;
  if (o.truth) {
    truth = io::read_matrix_csv(*o.truth);
    if (truth->rows() != M.count() || truth->cols() != Y.pixels()) {
      throw ArgumentError("--truth abundances do not match R x N");
    }
  }
  ensure_dir(o.out_dir);

  UnmixSpec spec = base;
  std::optional<UnmixResult> result;
  std::vector<GridPoint> grid_points;
  if (o.grid) {
    const std::vector<double> grid =
        std::holds_alternative<Rusal>(base.method) ? rusal_tau_grid() : nusal_tau_grid();
    GridSearchResult gs = grid_search(Y, M, base, grid, truth);
    spec = gs.best_spec;
    grid_points = std::move(gs.points);
    // Rerun the selected point so the history matches the reported solve.
    if (o.history) {
      result.emplace(unmix(Y, M, spec));
    } else {
      result.emplace(std::move(gs.best));
    }
  } else {
    result.emplace(unmix(Y, M, spec));
  }

  io::write_matrix_csv(o.out_dir / "abundances.csv", result->abundances.data());
  io::write_matrix_csv(o.out_dir / "residual_coeffs.csv",
                       result->residual_coeffs ? result->residual_coeffs->data() : MatrixXd());
  io::write_cube(o.out_dir / "reconstruction.hsib",
                 SpectralCube(result->reconstruction, Y.rows(), Y.cols()));
  const io::ScaledImage energy =
      io::scale_to_gray(eval::residual_energy_map(Y, M, result->abundances.data()));
  io::write_pgm(o.out_dir / "residual_energy.pgm", energy.image);

  // Assembly re-derives the solver trace only when history was requested.
  if (o.history) {
    auto assembled = assemble(Y, M, spec);
    auto solved = admm::solve(assembled.problem, spec.solver);
    std::ofstream hs(o.out_dir / "history.csv");
    if (!hs) throw FormatError("cannot write history.csv");
    admm::write_history_csv(hs, solved.state.history);
  }
  if (o.grid) {
    std::ofstream gs(o.out_dir / "grid.csv");
    if (!gs) throw FormatError("cannot write grid.csv");
    gs << "tau1,tau2," << (truth ? "armse" : "re") << ",converged\n";
    for (const auto& p : grid_points) {
      gs << io::format_double(p.tau1) << ',' << io::format_double(p.tau2) << ','
         << io::format_double(p.score) << ',' << (p.converged ? "true" : "false") << '\n';
    }
  }

  io::Manifest m;
  m.set("command", std::string("unmix"));
  m.set("method", o.method);
  if (const auto* n = std::get_if<Nusal>(&spec.method)) m.set("K", n->order);
  if (const auto* r = std::get_if<Rusal>(&spec.method)) m.set("D", r->dct_size);
  m.set("tau1", spec.tau1);
  m.set("tau2", spec.tau2);
  m.set("mu0", spec.solver.mu0);
  m.set("tol", spec.solver.tol);
  m.set("max_iter", spec.solver.max_iter);
  m.set("adapt", spec.solver.adapt);
  m.set("stop_rule", o.stop_rule);
  m.set("grid", o.grid);
  m.set("seed", std::to_string(o.seed));
  m.set("input_hash", io::hex64(io::hash_files({o.cube, o.endmembers})));
  m.set("converged", result->report.converged);
  m.set("iterations", result->report.iterations);
  m.set("primal_res", result->report.primal_res);
  m.set("dual_res", result->report.dual_res);
  m.set("threshold", result->report.threshold);
  m.set("objective", result->report.objective);
  m.set("residual_energy_min", energy.min);
  m.set("residual_energy_max", energy.max);
  m.set("runtime_s", result->report.wall_time_s);
  m.write(o.out_dir / "manifest.txt");

  out << o.method << ": " << (result->report.converged ? "converged" : "NOT converged")
      << " after " << result->report.iterations << " iterations, objective "
      << io::format_double(result->report.objective) << "\n";
}

void cmd_eval(const EvalOptions& o, std::ostream& out) {
  const SpectralCube Y = io::read_cube(o.cube);
  const MatrixXd A = io::read_matrix_csv(o.abundances);
  if (A.cols() != Y.pixels()) {
    throw ArgumentError("abundances have " + std::to_string(A.cols()) + " pixels, cube has " +
                        std::to_string(Y.pixels()));
  }

  MatrixXd Y_hat;
  if (o.reconstruction) {
    Y_hat = io::read_cube(*o.reconstruction).data();
  } else if (o.endmembers) {
    const EndmemberMatrix M = synth::load_endmembers(*o.endmembers);
    if (M.count() != A.rows() || M.bands() != Y.bands()) {
      throw ArgumentError("endmembers do not match abundances / cube");
    }
    Y_hat = M.data() * A;
  } else {
    throw ArgumentError("eval needs --reconstruction or --endmembers to compute RE and SAM");
  }
  if (Y_hat.rows() != Y.bands() || Y_hat.cols() != Y.pixels()) {
    throw ArgumentError("reconstruction shape does not match the cube");
  }

  ensure_dir(o.out_dir);
  io::Manifest m;
  m.set("command", std::string("eval"));
  std::optional<MatrixXd> truth;
  if (o.truth) {
    truth = io::read_matrix_csv(*o.truth);
    m.set("armse", eval::armse(*truth, A));
  }
  m.set("re", eval::reconstruction_error(Y.data(), Y_hat));
  const double sam = eval::sam(Y.data(), Y_hat);
  m.set("sam_rad", sam);
  m.set("sam_deg", sam * 180.0 / std::numbers::pi);
  if (o.run_manifest) {
    if (auto rt = io::Manifest::read(*o.run_manifest).get("runtime_s")) m.set("runtime_s", *rt);
  }

  if (truth && o.labels) {
    const Eigen::MatrixXi labels = io::gray_to_labels(io::read_pgm(*o.labels));
    if (labels.rows() != Y.rows() || labels.cols() != Y.cols()) {
      throw ArgumentError("label map geometry does not match the cube");
    }
    Eigen::VectorXi flat(labels.size());
    for (Index i = 0; i < labels.rows(); ++i) {
      for (Index j = 0; j < labels.cols(); ++j) flat(i * labels.cols() + j) = labels(i, j);
    }
    std::ofstream pc(o.out_dir / "per_class.csv");
    if (!pc) throw FormatError("cannot write per_class.csv");
    pc << "class,pixels,rmse\n";
    for (int c = 0; c <= flat.maxCoeff(); ++c) {
      const auto count = (flat.array() == c).count();
      if (count == 0) continue;
      const double rmse = eval::per_class_rmse(*truth, A, flat, c);
      pc << c << ',' << count << ',' << io::format_double(rmse) << '\n';
      m.set("rmse_class_" + std::to_string(c), rmse);
    }
  }
  m.write(o.out_dir / "metrics.txt");
  for (const auto& [k, v] : m.entries()) out << k << '=' << v << '\n';
}

void cmd_export_maps(const ExportOptions& o, std::ostream& out) {
  const MatrixXd A = io::read_matrix_csv(o.abundances);
  long rows = o.rows;
  long cols = o.cols;
  if (o.cube) {
    const SpectralCube Y = io::read_cube(*o.cube);
    rows = static_cast<long>(Y.rows());
    cols = static_cast<long>(Y.cols());
  }
  if (rows < 1 || cols < 1) throw ArgumentError("export-maps needs --cube or --rows/--cols");
  if (static_cast<Index>(rows) * cols != A.cols()) {
    throw ArgumentError("geometry " + std::to_string(rows) + "x" + std::to_string(cols) +
                        " does not match " + std::to_string(A.cols()) + " pixels");
  }
  ensure_dir(o.out_dir);

  io::Manifest side;
  for (Index r = 0; r < A.rows(); ++r) {
    MatrixXd map(rows, cols);
    for (Index n = 0; n < A.cols(); ++n) map(n / cols, n % cols) = A(r, n);
    const io::ScaledImage img = io::scale_to_gray(map);
    const std::string name = "abundance_" + std::to_string(r + 1);
    io::write_pgm(o.out_dir / (name + ".pgm"), img.image);
    side.set(name + ".min", img.min);
    side.set(name + ".max", img.max);
    side.set(name + ".degenerate", img.degenerate);
  }
  side.write(o.out_dir / "maps.txt");

  if (o.coeffs) {
    if (!o.endmembers) throw ArgumentError("--coeffs needs --endmembers to label interactions");
    const EndmemberMatrix M = synth::load_endmembers(*o.endmembers);
    const InteractionDictionary dict = build_interaction_matrix(M, o.order);
    const ResidualCoefficients gamma(io::read_matrix_csv(*o.coeffs), ResidualKind::Nonlinear);
    if (gamma.data().cols() != A.cols()) {
      throw ArgumentError("coefficients and abundances disagree on the pixel count");
    }
    const VectorXd profile = eval::mean_interaction_profile(gamma, dict);
    std::ofstream pf(o.out_dir / "interaction_profile.csv");
    if (!pf) throw FormatError("cannot write interaction_profile.csv");
    pf << "index,multi_index,mean\n";
    for (Index d = 0; d < profile.size(); ++d) {
      pf << d << ',' << multi_index_label(dict.indices[static_cast<std::size_t>(d)]) << ','
         << io::format_double(profile(d)) << '\n';
    }
  }
  out << "wrote " << A.rows() << " abundance maps to " << o.out_dir.string() << "\n";
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"hsunmix: supervised nonlinear and robust hyperspectral unmixing"};
  app.require_subcommand(1);

  SynthOptions so;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic scene with ground truth");
  synth_cmd->add_option("--preset", so.preset, "Scene recipe")->check(CLI::IsMember({"i1", "i2"}));
  synth_cmd->add_option("--rows", so.rows, "Image rows")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--cols", so.cols, "Image columns")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--bands", so.bands, "Spectral bands")->check(CLI::Range(8L, 100000L));
  synth_cmd->add_option("--endmembers", so.endmembers, "Endmember count")->check(CLI::Range(2, 64));
  synth_cmd->add_option("--snr-db", so.snr_db, "Target SNR in dB");
  synth_cmd->add_option("--seed", so.seed, "RNG seed");
  synth_cmd->add_option("--beta", so.beta, "Potts granularity");
  synth_cmd->add_option("--potts-sweeps", so.potts_sweeps, "Gibbs sweeps")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--out-dir", so.out_dir, "Output directory")->required();

  UnmixOptions uo;
  double tau1 = 0.0;
  double tau2 = 0.0;
  std::string truth;
  auto* unmix_cmd = app.add_subcommand("unmix", "Estimate abundances and residual coefficients");
  unmix_cmd->add_option("--method", uo.method, "nusal | rusal | linear")
      ->check(CLI::IsMember({"nusal", "rusal", "linear"}));
  unmix_cmd->add_option("--order", uo.order, "NUSAL interaction order K")->check(CLI::Range(2, 5));
  unmix_cmd->add_option("--dct-dim", uo.dct_dim, "RUSAL DCT dictionary size D")
      ->check(CLI::PositiveNumber);
  auto* tau1_opt = unmix_cmd->add_option("--tau1", tau1, "l1 weight")->check(CLI::NonNegativeNumber);
  auto* tau2_opt = unmix_cmd->add_option("--tau2", tau2, "l21 weight")->check(CLI::NonNegativeNumber);
  unmix_cmd->add_option("--cube", uo.cube, "Input HSIB cube")->required();
  unmix_cmd->add_option("--endmembers", uo.endmembers, "Endmember CSV (L x R)")->required();
  unmix_cmd->add_option("--out-dir", uo.out_dir, "Output directory")->required();
  unmix_cmd->add_option("--mu0", uo.mu0, "Initial ADMM penalty")->check(CLI::PositiveNumber);
  unmix_cmd->add_option("--tol", uo.tol, "Stopping tolerance")->check(CLI::NonNegativeNumber);
  unmix_cmd->add_option("--max-iter", uo.max_iter, "Iteration cap")->check(CLI::PositiveNumber);
  unmix_cmd->add_flag("--no-adapt", uo.no_adapt, "Keep mu fixed");
  unmix_cmd->add_option("--stop-rule", uo.stop_rule, "both | either")
      ->check(CLI::IsMember({"both", "either"}));
  unmix_cmd->add_flag("--history", uo.history, "Write history.csv");
  unmix_cmd->add_flag("--grid", uo.grid, "Search the tau grid");
  auto* truth_opt = unmix_cmd->add_option("--truth", truth, "Ground-truth abundances for --grid");
  unmix_cmd->add_option("--seed", uo.seed, "Recorded in the manifest");

  EvalOptions eo;
  std::string e_truth, e_labels, e_recon, e_end, e_manifest;
  auto* eval_cmd = app.add_subcommand("eval", "Compute aRMSE, RE and SAM");
  eval_cmd->add_option("--abundances", eo.abundances, "Estimated abundances CSV")->required();
  auto* e_truth_opt = eval_cmd->add_option("--truth", e_truth, "Ground-truth abundances CSV");
  auto* e_labels_opt = eval_cmd->add_option("--labels", e_labels, "Label map PGM");
  eval_cmd->add_option("--cube", eo.cube, "Observed HSIB cube")->required();
  auto* e_recon_opt = eval_cmd->add_option("--reconstruction", e_recon, "Reconstruction HSIB");
  auto* e_end_opt = eval_cmd->add_option("--endmembers", e_end, "Endmember CSV");
  auto* e_man_opt = eval_cmd->add_option("--run-manifest", e_manifest, "unmix manifest");
  eval_cmd->add_option("--out-dir", eo.out_dir, "Output directory")->required();

  ExportOptions xo;
  std::string x_cube, x_coeffs, x_end;
  auto* export_cmd = app.add_subcommand("export-maps", "Write abundance maps and interaction profiles");
  export_cmd->add_option("--abundances", xo.abundances, "Abundances CSV")->required();
  auto* x_cube_opt = export_cmd->add_option("--cube", x_cube, "Cube supplying the geometry");
  export_cmd->add_option("--rows", xo.rows, "Image rows");
  export_cmd->add_option("--cols", xo.cols, "Image columns");
  auto* x_coeffs_opt = export_cmd->add_option("--coeffs", x_coeffs, "NUSAL coefficient CSV");
  auto* x_end_opt = export_cmd->add_option("--endmembers", x_end, "Endmember CSV");
  export_cmd->add_option("--order", xo.order, "Interaction order K")->check(CLI::Range(2, 5));
  export_cmd->add_option("--out-dir", xo.out_dir, "Output directory")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << (app.get_subcommands().empty() ? app.help()
                                          : app.get_subcommands().front()->help());
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return kUsage;
  }

  try {
    if (synth_cmd->parsed()) {
      cmd_synth(so, out);
    } else if (unmix_cmd->parsed()) {
      if (*tau1_opt) uo.tau1 = tau1;
      if (*tau2_opt) uo.tau2 = tau2;
      if (*truth_opt) uo.truth = truth;
      cmd_unmix(uo, out);
    } else if (eval_cmd->parsed()) {
      if (*e_truth_opt) eo.truth = e_truth;
      if (*e_labels_opt) eo.labels = e_labels;
      if (*e_recon_opt) eo.reconstruction = e_recon;
      if (*e_end_opt) eo.endmembers = e_end;
      if (*e_man_opt) eo.run_manifest = e_manifest;
      cmd_eval(eo, out);
    } else if (export_cmd->parsed()) {
      if (*x_cube_opt) xo.cube = x_cube;
      if (*x_coeffs_opt) xo.coeffs = x_coeffs;
      if (*x_end_opt) xo.endmembers = x_end;
      cmd_export_maps(xo, out);
    }
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kNumeric;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kOk;
}

}  // namespace hsu::cli
