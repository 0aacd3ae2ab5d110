#include "jldict/cli.hpp"

#include "jldict/common.hpp"
#include "jldict/data.hpp"
#include "jldict/dimsel.hpp"
#include "jldict/model_io.hpp"
#include "jldict/pipeline.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

namespace jldict::cli {

namespace {

struct DataFlags {
  std::string data;
  std::string labels;
  std::string format = "csv";
  std::string label_column = "label";
};

void add_data_flags(CLI::App* cmd, DataFlags& flags, bool labeled) {
  cmd->add_option("--data", flags.data,
                  labeled ? "input samples: IDX image file or CSV with a label column"
                          : "input samples: IDX image file or numeric CSV")
      ->required();
  cmd->add_option("--format", flags.format, "input format")
      ->check(CLI::IsMember({"idx", "csv"}))
      ->capture_default_str();
  if (labeled) {
    cmd->add_option("--labels", flags.labels, "IDX label file (required with --format idx)");
  }
  cmd->add_option("--label-column", flags.label_column,
                  labeled ? "CSV column holding the class labels"
                          : "CSV column to drop if present (prediction inputs may carry one)")
      ->capture_default_str();
}

data::LabeledDataset load_training_data(const DataFlags& flags) {
  if (flags.format == "idx") {
    if (flags.labels.empty()) {
      throw std::invalid_argument("--format idx needs --labels alongside --data");
    }
    return data::load_idx(flags.data, flags.labels);
  }
  return data::load_csv(flags.data, flags.label_column);
}

MatrixXd load_feature_matrix(const DataFlags& flags) {
  if (flags.format == "idx") return data::load_idx_images(flags.data);
  return data::load_csv_matrix(flags.data, flags.label_column);
}

// The dimension source flags are mutually exclusive; when none is given the
// derivative-flattening rule picks epsilon (the library's own parameter
// determination). Documented in each subcommand's help text.
void add_pipeline_flags(CLI::App* cmd, pipeline::PipelineConfig& cfg) {
  auto* eps = cmd->add_option("--eps", cfg.epsilon,
                              "pairwise-distortion budget in (0,1); sets the projection dimension");
  auto* auto_eps = cmd->add_flag("--auto-eps,--auto", cfg.auto_eps,
                                 "pick eps where |dp/deps| flattens, clamped to [0.3,0.4] "
                                 "(the default when neither --eps nor --p is given)");
  auto* p_opt = cmd->add_option("--p", cfg.p_override,
                                "projection dimension override (bypasses the eps rule)")
                    ->check(CLI::PositiveNumber);
  eps->excludes(auto_eps);
  eps->excludes(p_opt);
  auto_eps->excludes(p_opt);

  cmd->add_option("--atoms-per-class", cfg.atoms_per_class, "dictionary atoms per class")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--sigma2", cfg.sigma2, "sparse-coder noise variance")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--tau", cfg.tau, "medoid-distance weight in the classification score")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--kernel-bandwidth", cfg.kernel_bandwidth,
                  "Gaussian kernel bandwidth (0 = median pairwise-distance heuristic)")
      ->capture_default_str();
  cmd->add_option("--kernel-ridge", cfg.kernel_ridge,
                  "Gram-matrix ridge (negative = default 1e-8 * trace/N)");
  cmd->add_option("--seed", cfg.seed, "seed for every random draw")->capture_default_str();
  cmd->add_option("--max-outer", cfg.max_outer, "dictionary-training outer iteration cap")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--tol", cfg.train_tol,
                  "absolute training-loss stop (0 = relative-improvement rule only)");
  cmd->add_option("--coder-iters", cfg.coder_max_iters, "sparse-coder EM iteration cap")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--coder-prune", cfg.coder_prune_threshold,
                  "variance threshold below which coefficients are pruned")
      ->capture_default_str();
  cmd->add_option("--coder-tol", cfg.coder_tol,
                  "relative variance-change threshold for coder convergence")
      ->capture_default_str();
  cmd->add_option("--augment-to", cfg.augment_to,
                  "grow every class to at least this many samples with noisy copies (0 = off)")
      ->capture_default_str();
  cmd->add_option("--augment-noise", cfg.augment_noise,
                  "noise std for augmented copies, in standardized units")
      ->capture_default_str();
}

void default_dimension_rule(pipeline::PipelineConfig& cfg) {
  if (cfg.epsilon <= 0.0 && !cfg.auto_eps && cfg.p_override <= 0) cfg.auto_eps = true;
}

void add_config_flag(CLI::App* cmd) {
  // The option itself is only declared for --help; expand_config_args consumes
  // any --config occurrences before CLI11 ever parses.
  cmd->add_option("--config",
                  "flat 'key: value' file using these option names; flags take precedence");
}

std::string trim_ws(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool option_given(const std::vector<std::string>& args, const std::string& name) {
  for (const std::string& a : args) {
    if (a == name) return true;
    if (a.size() > name.size() && a.compare(0, name.size(), name) == 0 && a[name.size()] == '=')
      return true;
  }
  return false;
}

// Replaces every "--config FILE" (or --config=FILE) with the file's entries as
// --key=value tokens in place. Keys already given as explicit flags are
// dropped, so the command line always wins; unknown keys surface as ordinary
// unrecognized-option usage errors during parsing.
std::vector<std::string> expand_config_args(std::vector<std::string> args) {
  std::size_t i = 0;
  while (i < args.size()) {
    std::string path;
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw std::invalid_argument("--config needs a file path");
      path = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i),
                 args.begin() + static_cast<std::ptrdiff_t>(i + 2));
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
    } else {
      ++i;
      continue;
    }
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot read config file '" + path + "'");
    std::vector<std::string> injected;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      std::string entry = trim_ws(line);
      if (entry.empty() || entry[0] == '#') continue;
      std::size_t colon = entry.find(':');
      if (colon == std::string::npos) {
        throw std::invalid_argument("config file '" + path + "' line " + std::to_string(lineno) +
                                    " is not 'key: value'");
      }
      std::string key = trim_ws(entry.substr(0, colon));
      std::string value = trim_ws(entry.substr(colon + 1));
      if (key.empty()) {
        throw std::invalid_argument("config file '" + path + "' line " + std::to_string(lineno) +
                                    " has an empty key");
      }
      if (key == "config") {
        throw std::invalid_argument("config file '" + path + "' line " + std::to_string(lineno) +
                                    ": config files cannot include other config files");
      }
      if (option_given(args, "--" + key)) continue;
      injected.push_back("--" + key + (value.empty() ? std::string() : "=" + value));
    }
    args.insert(args.begin() + static_cast<std::ptrdiff_t>(i), injected.begin(), injected.end());
    i += injected.size();
  }
  return args;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open '" + path + "' for writing", 0);
  return out;
}

long long label_value_of(const io::ModelBundle& bundle, int cls) {
  if (cls >= 0 && static_cast<std::size_t>(cls) < bundle.label_values.size()) {
    return bundle.label_values[static_cast<std::size_t>(cls)];
  }
  return cls;
}

long long label_value_of(const data::LabeledDataset& ds, int cls) {
  if (cls >= 0 && static_cast<std::size_t>(cls) < ds.label_values.size()) {
    return ds.label_values[static_cast<std::size_t>(cls)];
  }
  return cls;
}

// ---------------------------------------------------------------------------
// select-dim
// ---------------------------------------------------------------------------

struct SelectDimFlags {
  std::int64_t n = 0;
  double epsilon = 0.0;
  bool auto_eps = false;
  std::string out_path;
};

int cmd_select_dim(const SelectDimFlags& flags, std::string& stage, std::ostream& out) {
  stage = "dimension selection";
  double eps = flags.epsilon;
  if (flags.auto_eps || eps <= 0.0) eps = dimsel::select_epsilon(flags.n).value();
  dimsel::DimensionSelection sel = dimsel::select_dimension(flags.n, eps);
  out << "n=" << sel.n_samples << " eps=" << sel.epsilon << " p=" << sel.p
      << " dp/deps=" << sel.derivative << "\n";
  if (!flags.out_path.empty()) {
    stage = "curve output";
    std::ofstream csv = open_output(flags.out_path);
    dimsel::write_curve_csv(csv, dimsel::dimension_curve(flags.n, dimsel::default_epsilon_grid()));
    out << "curve written to " << flags.out_path << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

int cmd_train(const DataFlags& data_flags, pipeline::PipelineConfig cfg,
              const std::string& out_path, std::string& stage, std::ostream& out) {
  stage = "load data";
  data::LabeledDataset ds = load_training_data(data_flags);

  pipeline::FitResult fit = pipeline::fit(ds, cfg, &stage);

  stage = "save model";
  io::save_model(out_path, fit.bundle);

  stage = "report";
  out << "mode=" << (fit.kernel_mode ? "kernel" : "linear") << " p=" << fit.p;
  if (fit.epsilon_used > 0.0) out << " eps=" << fit.epsilon_used;
  out << " (N=" << ds.n() << ", d=" << ds.d() << ", C=" << ds.n_classes << ")\n";
  out << "loss trajectory:";
  for (double loss : fit.report.loss_trajectory) out << ' ' << loss;
  out << "\n";
  if (fit.report.converged) {
    out << "converged after " << fit.report.outer_iterations << " outer iterations";
  } else {
    out << "stopped at the " << fit.report.outer_iterations << "-iteration cap";
  }
  out << " (" << fit.report.replaced_atoms << " atoms replaced)\n";
  out << "train time: " << fit.train_seconds << " s\n";
  out << "model written to " << out_path << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// predict
// ---------------------------------------------------------------------------

struct PredictFlags {
  std::string model_path;
  std::string out_path = "-";
};

int cmd_predict(const PredictFlags& flags, const DataFlags& data_flags, std::string& stage,
                std::ostream& out) {
  stage = "load model";
  io::ModelBundle bundle = io::load_model(flags.model_path);

  stage = "load input";
  MatrixXd Yq = load_feature_matrix(data_flags);

  stage = "predict";
  std::ofstream file;
  std::ostream* sink = &out;
  if (flags.out_path != "-") {
    file = open_output(flags.out_path);
    sink = &file;
  }
  *sink << "index,predicted_label,score_best,score_margin\n";
  if (Yq.cols() > 0) {
    MatrixXd Ys = data::apply_standardization(Yq, bundle.feature_mean, bundle.feature_std);
    for (Eigen::Index i = 0; i < Ys.cols(); ++i) {
      classify::Classification result = classify::classify(bundle.classifier, Ys.col(i));
      double best = result.scores(result.label);
      double margin = 0.0;
      if (result.scores.size() > 1) {
        double second = std::numeric_limits<double>::infinity();
        for (Eigen::Index c = 0; c < result.scores.size(); ++c) {
          if (c != result.label) second = std::min(second, result.scores(c));
        }
        margin = second - best;
      }
      *sink << i << ',' << label_value_of(bundle, result.label) << ',' << format_float(best)
            << ',' << format_float(margin) << "\n";
    }
  }
  if (sink != &out) {
    out << Yq.cols() << " predictions written to " << flags.out_path << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalFlags {
  int folds = 3;
  int jobs = 1;
  std::string out_prefix = "eval";
};

int cmd_eval(const EvalFlags& flags, const DataFlags& data_flags, pipeline::PipelineConfig cfg,
             std::string& stage, std::ostream& out) {
  stage = "load data";
  data::LabeledDataset ds = load_training_data(data_flags);

  stage = "cross-validation";
  pipeline::CrossValResult cv = pipeline::cross_validate(ds, cfg, flags.folds, flags.jobs);

  stage = "write outputs";
  std::string folds_path = flags.out_prefix + "_folds.csv";
  {
    std::ofstream csv = open_output(folds_path);
    csv << "fold,p,kernel,accuracy,macro_f1,train_seconds,test_ms_per_sample\n";
    for (std::size_t f = 0; f < cv.folds.size(); ++f) {
      const pipeline::FoldOutcome& fold = cv.folds[f];
      csv << f << ',' << fold.p << ',' << (fold.kernel_mode ? 1 : 0) << ','
          << format_float(fold.metrics.accuracy) << ',' << format_float(fold.metrics.macro_f1)
          << ',' << format_float(fold.train_seconds) << ','
          << format_float(fold.metrics.mean_ms_per_sample) << "\n";
    }
  }
  for (std::size_t f = 0; f < cv.folds.size(); ++f) {
    std::ofstream csv = open_output(flags.out_prefix + "_fold" + std::to_string(f) +
                                    "_confusion.csv");
    const Eigen::MatrixXi& confusion = cv.folds[f].metrics.confusion;
    csv << "true_label";
    for (Eigen::Index c = 0; c < confusion.cols(); ++c) {
      csv << ",pred_" << label_value_of(ds, static_cast<int>(c));
    }
    csv << "\n";
    for (Eigen::Index r = 0; r < confusion.rows(); ++r) {
      csv << label_value_of(ds, static_cast<int>(r));
      for (Eigen::Index c = 0; c < confusion.cols(); ++c) csv << ',' << confusion(r, c);
      csv << "\n";
    }
  }

  out << "folds=" << flags.folds << " N=" << ds.n() << " d=" << ds.d()
      << " classes=" << ds.n_classes << "\n";
  out << "accuracy: " << cv.mean_accuracy << " +/- " << cv.std_accuracy << "\n";
  out << "macro_f1: " << cv.mean_f1 << " +/- " << cv.std_f1 << "\n";
  out << "mean train time: " << cv.mean_train_seconds
      << " s, mean test time: " << cv.mean_test_ms << " ms/sample\n";
  out << "per-fold results: " << folds_path << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

struct SweepFlags {
  int folds = 3;
  int jobs = 1;
  std::string out_path = "sweep.csv";
  pipeline::SweepGrids grids;
};

int cmd_sweep(const SweepFlags& flags, const DataFlags& data_flags, pipeline::PipelineConfig cfg,
              std::string& stage, std::ostream& out) {
  stage = "load data";
  data::LabeledDataset ds = load_training_data(data_flags);

  stage = "sweep";
  std::vector<pipeline::SweepCell> cells =
      pipeline::sweep(ds, cfg, flags.grids, flags.folds, flags.jobs);

  stage = "write outputs";
  std::size_t best = 0;
  std::vector<int> realized_p(cells.size(), 0);
  {
    std::ofstream csv = open_output(flags.out_path);
    csv << "sigma2,tau,p,atoms_per_class,accuracy,macro_f1,train_seconds,test_ms_per_sample\n";
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const pipeline::SweepCell& cell = cells[i];
      realized_p[i] = cell.p_override > 0 ? cell.p_override : cell.result.folds.front().p;
      csv << format_float(cell.sigma2) << ',' << format_float(cell.tau) << ',' << realized_p[i]
          << ',' << cell.atoms_per_class << ',' << format_float(cell.result.mean_accuracy) << ','
          << format_float(cell.result.mean_f1) << ','
          << format_float(cell.result.mean_train_seconds) << ','
          << format_float(cell.result.mean_test_ms) << "\n";
      if (cell.result.mean_accuracy > cells[best].result.mean_accuracy) best = i;
    }
  }

  out << cells.size() << " cells x " << flags.folds << " folds written to " << flags.out_path
      << "\n";
  const pipeline::SweepCell& b = cells[best];
  out << "best: sigma2=" << b.sigma2 << " tau=" << b.tau << " p=" << realized_p[best]
      << " atoms_per_class=" << b.atoms_per_class << " accuracy=" << b.result.mean_accuracy
      << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// distortion
// ---------------------------------------------------------------------------

struct DistortionFlags {
  std::string model_path;
  std::size_t pairs = 1000;
  std::uint64_t seed = 0;
  double fallback_eps = 0.3;
  bool scaled = false;
  std::string out_prefix = "distortion";
};

void write_histogram_csv(const std::string& path, const embed::DistortionReport& report) {
  std::ofstream csv = open_output(path);
  csv << "bin_lo,bin_hi,count\n";
  for (std::size_t b = 0; b < report.bin_counts.size(); ++b) {
    csv << format_float(report.bin_edges[b]) << ',' << format_float(report.bin_edges[b + 1])
        << ',' << report.bin_counts[b] << "\n";
  }
}

void write_histogram_svg(const std::string& path, const embed::DistortionReport& report) {
  std::ofstream svg = open_output(path);
  const double width = 640.0, height = 400.0;
  const double ml = 60.0, mr = 20.0, mt = 30.0, mb = 50.0;
  const double pw = width - ml - mr, ph = height - mt - mb;
  std::size_t max_count = 1;
  for (std::size_t c : report.bin_counts) max_count = std::max(max_count, c);
  double lo = report.bin_edges.front();
  double hi = report.bin_edges.back();

  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  svg << "  <title>pairwise squared-distance ratio histogram</title>\n";
  svg << "  <rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";

  double bar_width = pw / static_cast<double>(report.bin_counts.size());
  for (std::size_t b = 0; b < report.bin_counts.size(); ++b) {
    double h = ph * static_cast<double>(report.bin_counts[b]) / static_cast<double>(max_count);
    double x = ml + bar_width * static_cast<double>(b);
    svg << "  <rect x=\"" << x + bar_width * 0.05 << "\" y=\"" << mt + ph - h << "\" width=\""
        << bar_width * 0.9 << "\" height=\"" << h << "\" fill=\"#4878a8\"/>\n";
  }

  if (hi > lo) {
    for (double v : {1.0 - report.epsilon, 1.0 + report.epsilon}) {
      if (v < lo || v > hi) continue;
      double x = ml + (v - lo) / (hi - lo) * pw;
      svg << "  <line x1=\"" << x << "\" y1=\"" << mt << "\" x2=\"" << x << "\" y2=\"" << mt + ph
          << "\" stroke=\"#c04040\" stroke-dasharray=\"4 3\"/>\n";
    }
  }

  svg << "  <text x=\"" << ml << "\" y=\"" << height - mb + 20
      << "\" font-size=\"12\" text-anchor=\"middle\">" << lo << "</text>\n";
  svg << "  <text x=\"" << ml + pw << "\" y=\"" << height - mb + 20
      << "\" font-size=\"12\" text-anchor=\"middle\">" << hi << "</text>\n";
  svg << "  <text x=\"" << ml - 8 << "\" y=\"" << mt + 6
      << "\" font-size=\"12\" text-anchor=\"end\">" << max_count << "</text>\n";
  svg << "  <text x=\"" << ml + pw / 2 << "\" y=\"" << height - 10
      << "\" font-size=\"12\" text-anchor=\"middle\">squared-distance ratio</text>\n";
  svg << "  <text x=\"" << ml + pw / 2 << "\" y=\"" << mt - 10
      << "\" font-size=\"13\" text-anchor=\"middle\">pair count per ratio bin</text>\n";
  svg << "</svg>\n";
}

int cmd_distortion(const DistortionFlags& flags, const DataFlags& data_flags, std::string& stage,
                   std::ostream& out, std::ostream& err) {
  stage = "load model";
  io::ModelBundle bundle = io::load_model(flags.model_path);
  if (bundle.classifier.projection.mode == embed::ProjectionMode::kernel) {
    err << "error: the distortion diagnostic is defined for linear-mode models only\n";
    return 2;
  }

  stage = "load data";
  MatrixXd Yq = load_feature_matrix(data_flags);
  MatrixXd Ys = data::apply_standardization(Yq, bundle.feature_mean, bundle.feature_std);

  stage = "distortion report";
  embed::ProjectionModel proj = bundle.classifier.projection;
  bool fallback = !(proj.epsilon > 0.0 && proj.epsilon < 1.0);
  if (fallback) proj.epsilon = flags.fallback_eps;
  if (flags.scaled) proj.scale_jl = true;
  embed::DistortionReport report = embed::distortion_report(proj, Ys, flags.pairs, flags.seed);

  stage = "write outputs";
  std::string csv_path = flags.out_prefix + "_histogram.csv";
  std::string svg_path = flags.out_prefix + ".svg";
  write_histogram_csv(csv_path, report);
  write_histogram_svg(svg_path, report);

  out << "pairs=" << report.n_pairs << " eps=" << report.epsilon
      << (fallback ? " (flag fallback; model carries none)" : " (from model)")
      << (proj.scale_jl ? " map=scaled" : " map=unscaled") << "\n";
  out << "ratio: min=" << report.min_ratio << " mean=" << report.mean_ratio
      << " max=" << report.max_ratio << "\n";
  out << "fraction outside (1-eps, 1+eps): " << report.fraction_outside << "\n";
  out << "histogram: " << csv_path << ", plot: " << svg_path << "\n";
  return 0;
}

}  // namespace

int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"dictionary-learning classifier with a distortion-bounded supervised projection",
               "jldict"};
  app.require_subcommand(1);

  SelectDimFlags sd;
  CLI::App* select_dim = app.add_subcommand(
      "select-dim", "pick the projection dimension from the sample count and eps");
  select_dim->add_option("--n", sd.n, "number of samples the bound must cover")
      ->required()
      ->check(CLI::Range(std::int64_t{2}, std::numeric_limits<std::int64_t>::max()));
  auto* sd_eps = select_dim->add_option("--eps", sd.epsilon, "distortion budget in (0,1)");
  auto* sd_auto = select_dim->add_flag("--auto,--auto-eps", sd.auto_eps,
                                       "pick eps where |dp/deps| flattens (default)");
  sd_eps->excludes(sd_auto);
  select_dim->add_option("--out", sd.out_path, "write the (eps, p, dp/deps) curve CSV here");
  add_config_flag(select_dim);

  DataFlags train_data;
  pipeline::PipelineConfig train_cfg;
  std::string train_out;
  CLI::App* train = app.add_subcommand("train", "fit the full pipeline and save a model");
  add_data_flags(train, train_data, true);
  add_pipeline_flags(train, train_cfg);
  train->add_option("--out", train_out, "model file to write")->required();
  add_config_flag(train);

  PredictFlags pr;
  DataFlags predict_data;
  CLI::App* predict = app.add_subcommand("predict", "classify unlabeled samples with a model");
  predict->add_option("--model", pr.model_path, "trained model file")->required();
  add_data_flags(predict, predict_data, false);
  predict->add_option("--out", pr.out_path, "output CSV path ('-' = stdout)")
      ->capture_default_str();
  add_config_flag(predict);

  EvalFlags ev;
  DataFlags eval_data;
  pipeline::PipelineConfig eval_cfg;
  CLI::App* eval = app.add_subcommand("eval", "stratified k-fold cross-validation");
  add_data_flags(eval, eval_data, true);
  add_pipeline_flags(eval, eval_cfg);
  eval->add_option("--folds", ev.folds, "fold count")
      ->check(CLI::Range(2, 1000000))
      ->capture_default_str();
  eval->add_option("--jobs", ev.jobs, "concurrent fold trainings")
      ->check(CLI::Range(1, 4096))
      ->capture_default_str();
  eval->add_option("--out", ev.out_prefix, "output file prefix")->capture_default_str();
  add_config_flag(eval);

  SweepFlags sw;
  DataFlags sweep_data;
  pipeline::PipelineConfig sweep_cfg;
  CLI::App* sweep = app.add_subcommand(
      "sweep", "cross-validate every cell of a hyperparameter grid");
  add_data_flags(sweep, sweep_data, true);
  add_pipeline_flags(sweep, sweep_cfg);
  sweep->add_option("--sigma2-grid", sw.grids.sigma2, "comma-separated sigma2 values")
      ->delimiter(',');
  sweep->add_option("--tau-grid", sw.grids.tau, "comma-separated tau values")->delimiter(',');
  sweep->add_option("--p-grid", sw.grids.p, "comma-separated projection dimensions")
      ->delimiter(',')
      ->check(CLI::PositiveNumber);
  sweep->add_option("--apc-grid", sw.grids.atoms_per_class,
                    "comma-separated atoms-per-class values")
      ->delimiter(',')
      ->check(CLI::PositiveNumber);
  sweep->add_option("--folds", sw.folds, "fold count per cell")
      ->check(CLI::Range(2, 1000000))
      ->capture_default_str();
  sweep->add_option("--jobs", sw.jobs, "concurrent cell evaluations")
      ->check(CLI::Range(1, 4096))
      ->capture_default_str();
  sweep->add_option("--out", sw.out_path, "output CSV path")->capture_default_str();
  add_config_flag(sweep);

  DistortionFlags di;
  DataFlags distortion_data;
  CLI::App* distortion = app.add_subcommand(
      "distortion", "measure pairwise squared-distance ratios under a model's projection");
  distortion->add_option("--model", di.model_path, "trained model file (linear mode)")
      ->required();
  add_data_flags(distortion, distortion_data, false);
  distortion->add_option("--pairs", di.pairs, "distinct sample pairs to measure")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  distortion->add_option("--seed", di.seed, "pair-sampling seed")->capture_default_str();
  distortion->add_option("--eps", di.fallback_eps,
                         "budget for the outside-fraction when the model carries none")
      ->capture_default_str();
  distortion->add_flag("--scaled", di.scaled,
                       "divide projections by sqrt(p) (the distortion-bound form of the map)");
  distortion->add_option("--out", di.out_prefix, "output file prefix")->capture_default_str();
  add_config_flag(distortion);

  try {
    args = expand_config_args(std::move(args));
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  std::reverse(args.begin(), args.end());
  try {
    app.parse(std::move(args));
  } catch (const CLI::CallForHelp&) {
    std::vector<CLI::App*> subs = app.get_subcommands();
    out << (subs.empty() ? app.help() : subs.front()->help());
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    std::vector<CLI::App*> subs = app.get_subcommands();
    err << "run 'jldict " << (subs.empty() ? std::string() : subs.front()->get_name() + " ")
        << "--help' for usage\n";
    return 2;
  }

  std::string stage = "argument handling";
  try {
    if (app.got_subcommand(select_dim)) return cmd_select_dim(sd, stage, out);
    if (app.got_subcommand(train)) {
      default_dimension_rule(train_cfg);
      return cmd_train(train_data, train_cfg, train_out, stage, out);
    }
    if (app.got_subcommand(predict)) return cmd_predict(pr, predict_data, stage, out);
    if (app.got_subcommand(eval)) {
      default_dimension_rule(eval_cfg);
      return cmd_eval(ev, eval_data, eval_cfg, stage, out);
    }
    if (app.got_subcommand(sweep)) {
      default_dimension_rule(sweep_cfg);
      return cmd_sweep(sw, sweep_data, sweep_cfg, stage, out);
    }
    if (app.got_subcommand(distortion)) return cmd_distortion(di, distortion_data, stage, out, err);
    err << "error: no subcommand selected\n";
    return 2;
  } catch (const CorruptModel& e) {
    err << "error: stage '" << stage << "': " << e.what() << "\n";
    return 4;
  } catch (const NumericalFailure& e) {
    err << "error: stage '" << stage << "': " << e.what() << "\n";
    return 5;
  } catch (const DimensionMismatch& e) {
    err << "error: stage '" << stage << "': " << e.what() << "\n";
    return 3;
  } catch (const ParseError& e) {
    err << "error: stage '" << stage << "': " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    err << "error: stage '" << stage << "': " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: stage '" << stage << "': " << e.what() << "\n";
    return 1;
  }
}

}  // namespace jldict::cli
