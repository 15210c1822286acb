#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nflow/dataset.hpp"
#include "nflow/discretize.hpp"
#include "nflow/errors.hpp"
#include "nflow/kernels.hpp"
#include "nflow/serialize.hpp"
#include "nflow/train.hpp"
#include "nflow/verify.hpp"

namespace fs = std::filesystem;
using namespace nflow;
using io::Json;

namespace {

constexpr const char* kToolVersion = "0.1.0";

enum Exit { kOk = 0, kUsage = 2, kData = 3, kNumeric = 4 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
}

std::string num(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

/// Flat key=value file; keys keep insertion order.
class Manifest {
 public:
  explicit Manifest(std::string command) { set("command", std::move(command)); }
  void set(const std::string& k, const std::string& v) {
    for (auto& kv : entries_) {
      if (kv.first == k) {
        kv.second = v;
        return;
      }
    }
    entries_.emplace_back(k, v);
  }
  void set(const std::string& k, double v) { set(k, num(v)); }
  void set(const std::string& k, long v) { set(k, std::to_string(v)); }
  void set(const std::string& k, int v) { set(k, std::to_string(v)); }
  void write(const fs::path& path) const {
    std::string text;
    text += "nflow_version=" + std::string(kToolVersion) + "\n";
    text += "model_format_version=" + std::string(kModelFormatVersion) + "\n";
    for (const auto& [k, v] : entries_) text += k + "=" + v + "\n";
    write_file(path, text);
  }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

// ---- CSV states ----

Matrix read_state_csv(const std::string& text, int channels) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw FormatError("empty state file");
  std::vector<std::vector<double>> rows;
  int lineno = 1;
  const auto parse_row = [&](const std::string& l) {
    std::vector<double> row;
    std::stringstream ls(l);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(cell, &used);
      } catch (const std::exception&) {
        throw FormatError("line " + std::to_string(lineno) + ": not a number: '" + cell + "'");
      }
      if (used != cell.size()) throw FormatError("line " + std::to_string(lineno) + ": trailing text in '" + cell + "'");
      row.push_back(v);
    }
    if (static_cast<int>(row.size()) != channels) {
      throw FormatError("line " + std::to_string(lineno) + ": expected " + std::to_string(channels) + " values");
    }
    rows.push_back(std::move(row));
  };
  // Header c0,...,c{D-1} is optional.
  if (line.rfind("c0", 0) != 0) parse_row(line);
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) parse_row(line);
  }
  if (rows.empty()) throw FormatError("state file has no rows");
  Matrix out(channels, static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (int c = 0; c < channels; ++c) out(c, static_cast<Eigen::Index>(r)) = rows[r][static_cast<std::size_t>(c)];
  }
  return out;
}

/// One row per probe (scalar channels) or per grid point.
std::string state_csv(const Matrix& values) {
  std::ostringstream os;
  os.precision(17);
  for (Eigen::Index c = 0; c < values.rows(); ++c) os << (c ? "," : "") << "c" << c;
  os << "\n";
  for (Eigen::Index r = 0; r < values.cols(); ++r) {
    for (Eigen::Index c = 0; c < values.rows(); ++c) os << (c ? "," : "") << values(c, r);
    os << "\n";
  }
  return os.str();
}

std::string loss_csv(const std::vector<double>& curve) {
  std::ostringstream os;
  os.precision(17);
  os << "iteration,loss\n";
  for (std::size_t i = 0; i < curve.size(); ++i) os << i << "," << curve[i] << "\n";
  return os.str();
}

std::string metrics_csv(const std::vector<std::pair<std::string, double>>& m) {
  std::string out = "metric,value\n";
  for (const auto& [k, v] : m) out += k + "," + num(v) + "\n";
  return out;
}

// ---- commands ----

int cmd_integrate(const std::string& path_file, const std::string& z0_file, int substeps, const std::string& out) {
  const io::PathDocument doc = io::load_path(read_file(path_file));
  const Matrix z0 = read_state_csv(read_file(z0_file), doc.path.channels());
  Matrix result;
  if (doc.kind.is_grid()) {
    if (z0.cols() != doc.kind.points()) {
      throw FormatError("grid path needs one row per grid point (" + std::to_string(doc.kind.points()) + ")");
    }
    result = integrate_reference(FlowProblem(doc.path, LatentState(doc.kind, z0), doc.activation), substeps).values();
  } else {
    std::vector<LatentState> probes;
    for (Eigen::Index c = 0; c < z0.cols(); ++c) probes.push_back(LatentState::scalars(z0.col(c)));
    const auto finals = kernels::omp::integrate_batch(doc.path, doc.activation, probes, substeps);
    result.resize(z0.rows(), z0.cols());
    for (std::size_t c = 0; c < finals.size(); ++c) result.col(static_cast<Eigen::Index>(c)) = finals[c].values().col(0);
  }
  write_file(out, state_csv(result));
  Manifest m("integrate");
  m.set("path", path_file);
  m.set("z0", z0_file);
  m.set("substeps", substeps);
  m.set("out", out);
  m.set("structure", to_string(doc.path.structure()));
  m.set("channels", doc.path.channels());
  m.set("segments", static_cast<long>(doc.path.size()));
  m.set("total_time", doc.path.total_time());
  m.set("rows", static_cast<long>(result.cols()));
  m.write(out + ".manifest");
  return kOk;
}

int cmd_discretize(const std::string& path_file, double dt, const std::string& scheme, const std::string& out) {
  const io::PathDocument doc = io::load_path(read_file(path_file));
  const Structure st = doc.path.structure();
  if (scheme == "euler" && st != Structure::Composition) {
    throw UsageError("scheme euler needs a composition path, got " + std::string(to_string(st)));
  }
  if (scheme == "split" && st != Structure::Separation) {
    throw UsageError("scheme split needs a separation path, got " + std::string(to_string(st)));
  }
  const TimeCorrection tc = time_correct(doc.path, dt);
  Network net = scheme == "euler" ? euler_resnet(tc.path, dt, doc.activation, doc.kind)
                                  : merge_affine(split_plain(tc.path, dt, doc.activation, doc.kind));
  const auto steps = aligned_steps(tc.path, dt);
  long L = 0;
  for (long s : steps) L += s;
  write_file(out, save(net));
  Manifest m("discretize");
  m.set("path", path_file);
  m.set("dt", dt);
  m.set("scheme", scheme);
  m.set("out", out);
  m.set("structure", to_string(st));
  m.set("total_time", tc.path.total_time());
  m.set("max_shift", tc.max_shift);
  m.set("L", L);
  m.set("network_layers", static_cast<long>(net.layers().size()));
  m.write(out + ".manifest");
  return kOk;
}

int cmd_verify(const std::string& suite, std::uint64_t seed, const std::string& out) {
  if (!verify::is_suite(suite)) throw UsageError("unknown suite '" + suite + "'");
  const auto results = verify::run_suite(suite, seed);
  const std::string report = verify::format_report(results);
  std::cout << report;
  bool ok = true;
  for (const auto& r : results) ok = ok && r.passed;
  if (!out.empty()) {
    write_file(out, report);
    Manifest m("verify");
    m.set("suite", suite);
    m.set("seed", std::to_string(seed));
    m.set("out", out);
    m.set("checks", static_cast<long>(results.size()));
    m.set("passed", ok ? "true" : "false");
    m.write(out + ".manifest");
  }
  return ok ? kOk : kNumeric;
}

// ---- training configs ----

template <class T>
T get_or(const Json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

FitTemplate template_from(const Json& j) {
  FitTemplate t;
  t.structure = structure_from_string(get_or<std::string>(j, "structure", "separation"));
  t.channels = get_or(j, "channels", t.channels);
  t.input_dim = get_or(j, "input_dim", t.input_dim);
  t.output_dim = get_or(j, "output_dim", t.output_dim);
  t.segments = get_or(j, "segments", t.segments);
  t.steps_per_segment = get_or(j, "steps_per_segment", t.steps_per_segment);
  t.dt = get_or(j, "dt", t.dt);
  t.slope_a = get_or(j, "slope_a", t.slope_a);
  t.train_alpha = get_or(j, "train_alpha", t.train_alpha);
  t.alpha_init = get_or(j, "alpha_init", t.alpha_init);
  t.weight_scale = get_or(j, "weight_scale", t.weight_scale);
  t.bias_scale = get_or(j, "bias_scale", t.bias_scale);
  t.io_scale = get_or(j, "io_scale", t.io_scale);
  return t;
}

OptimizerConfig optimizer_from(const Json& j) {
  OptimizerConfig o;
  o.iterations = get_or(j, "iterations", o.iterations);
  o.learning_rate = get_or(j, "learning_rate", o.learning_rate);
  o.final_learning_rate = get_or(j, "final_learning_rate", o.final_learning_rate);
  o.lbfgs_iterations = get_or(j, "lbfgs_iterations", o.lbfgs_iterations);
  o.lbfgs_history = get_or(j, "lbfgs_history", o.lbfgs_history);
  return o;
}

double builtin_target(const std::string& name, double x) {
  if (name == "abs") return std::abs(x);
  if (name == "sin_pi") return std::sin(M_PI * x);
  if (name == "double") return 2.0 * x;
  throw DomainError("unknown target '" + name + "' (expected abs, sin_pi or double)");
}

Matrix grid_on_interval(int count) {
  Matrix x(1, count);
  for (int i = 0; i < count; ++i) x(0, i) = count == 1 ? 0.0 : -1.0 + 2.0 * i / (count - 1);
  return x;
}

int cmd_train(const std::string& config_file) {
  const Json cfg = io::parse(read_file(config_file));
  const fs::path out_dir = get_or<std::string>(cfg, "out_dir", "train_out");
  FitTemplate tmpl = template_from(cfg.value("template", Json::object()));
  FitTask task;
  task.optimizer = optimizer_from(cfg.value("optimizer", Json::object()));
  task.seed = get_or<std::uint64_t>(cfg, "seed", 0);
  const std::string target = get_or<std::string>(cfg, "target", "");
  if (target.empty()) throw FormatError("config needs a 'target' (abs, sin_pi or double)");
  const int samples = get_or(cfg, "samples", 201);
  if (samples < 1) throw FormatError("samples must be positive");
  tmpl.input_dim = 1;
  tmpl.output_dim = 1;
  task.inputs = grid_on_interval(samples);
  task.targets.resize(1, samples);
  for (int i = 0; i < samples; ++i) task.targets(0, i) = builtin_target(target, task.inputs(0, i));

  const FitResult fr = fit(task, tmpl);

  const Matrix eval_x = grid_on_interval(2001);
  const Matrix pred_train = forward(fr.network, task.inputs);
  const Matrix pred_eval = forward(fr.network, eval_x);
  double train_sup = 0.0, eval_sup = 0.0;
  for (Eigen::Index i = 0; i < pred_train.cols(); ++i) {
    train_sup = std::max(train_sup, std::abs(pred_train(0, i) - task.targets(0, i)));
  }
  for (Eigen::Index i = 0; i < pred_eval.cols(); ++i) {
    eval_sup = std::max(eval_sup, std::abs(pred_eval(0, i) - builtin_target(target, eval_x(0, i))));
  }

  write_file(out_dir / "model.json", save(fr.network));
  write_file(out_dir / "path.json", io::save_path({fr.model.path, ChannelKind::scalar(), fr.model.activation}));
  write_file(out_dir / "loss.csv", loss_csv(fr.loss_curve));
  write_file(out_dir / "metrics.csv", metrics_csv({{"best_loss", fr.best_loss},
                                                   {"train_sup_error", train_sup},
                                                   {"eval_sup_error", eval_sup},
                                                   {"layers", static_cast<double>(fr.network.layers().size())}}));
  Manifest m("train");
  m.set("config", config_file);
  m.set("config_json", cfg.dump());
  m.set("out_dir", out_dir.string());
  m.set("seed", std::to_string(task.seed));
  m.set("best_loss", fr.best_loss);
  m.set("eval_sup_error", eval_sup);
  m.write(out_dir / "run.manifest");
  std::cout << "best_loss=" << num(fr.best_loss) << " eval_sup_error=" << num(eval_sup) << "\n";
  return kOk;
}

int cmd_train_operator(const std::string& config_file) {
  const Json cfg = io::parse(read_file(config_file));
  const fs::path out_dir = get_or<std::string>(cfg, "out_dir", "operator_out");
  const int n = get_or(cfg, "n", 64);
  const int k = get_or(cfg, "k", 9);
  const int mm = get_or(cfg, "m", 9);
  const BasisFrame frame = BasisFrame::fourier(n, k, mm);

  OperatorTask task;
  task.optimizer = optimizer_from(cfg.value("optimizer", Json::object()));
  task.seed = get_or<std::uint64_t>(cfg, "seed", 0);
  const fs::path base = fs::path(config_file).parent_path();
  const auto load_functions = [&](const char* key) {
    const Matrix f = functions_from_csv(read_file((base / cfg.at(key).get<std::string>()).string()));
    if (f.rows() != n) throw FormatError(std::string(key) + ": grid size differs from n");
    return f;
  };
  std::string source;
  if (cfg.contains("train_inputs")) {
    task.train_inputs = load_functions("train_inputs");
    task.train_outputs = load_functions("train_outputs");
    task.heldout_inputs = load_functions("heldout_inputs");
    task.heldout_outputs = load_functions("heldout_outputs");
    source = "files";
  } else {
    const OperatorKind kind = operator_kind_from_string(get_or<std::string>(cfg, "operator", "antiderivative"));
    const int modes = get_or(cfg, "modes", (std::min(k, mm) - 1) / 2);
    const auto data_seed = get_or<std::uint64_t>(cfg, "data_seed", 1);
    const FunctionDataset train = fourier_dataset(kind, n, modes, get_or(cfg, "train_count", 64), data_seed);
    const FunctionDataset held = fourier_dataset(kind, n, modes, get_or(cfg, "heldout_count", 32), data_seed + 1);
    task.train_inputs = train.inputs;
    task.train_outputs = train.outputs;
    task.heldout_inputs = held.inputs;
    task.heldout_outputs = held.outputs;
    source = to_string(kind);
  }
  FitTemplate tmpl = template_from(cfg.value("template", Json::object()));
  tmpl.input_dim = k;
  tmpl.output_dim = mm;

  const OperatorFitResult r = fit_operator(task, frame, tmpl);
  write_file(out_dir / "operator.json", save(r.model));
  write_file(out_dir / "loss.csv", loss_csv(r.loss_curve));
  write_file(out_dir / "metrics.csv", metrics_csv({{"heldout_relative_l2", r.metrics.heldout_relative_l2},
                                                   {"truncation_relative_l2", r.metrics.truncation_relative_l2},
                                                   {"network_relative_l2", r.metrics.network_relative_l2},
                                                   {"coefficient_bound", r.metrics.coefficient_bound}}));
  Manifest m("train-operator");
  m.set("config", config_file);
  m.set("config_json", cfg.dump());
  m.set("out_dir", out_dir.string());
  m.set("data", source);
  m.set("seed", std::to_string(task.seed));
  m.set("heldout_relative_l2", r.metrics.heldout_relative_l2);
  m.write(out_dir / "run.manifest");
  std::cout << "heldout_relative_l2=" << num(r.metrics.heldout_relative_l2) << "\n";
  return kOk;
}

int cmd_error_table(const std::string& path_file, const std::vector<double>& dts, const std::string& z0_file,
                    int substeps, const std::string& out) {
  const io::PathDocument doc = io::load_path(read_file(path_file));
  const Matrix z0 = read_state_csv(read_file(z0_file), doc.path.channels());
  std::vector<LatentState> probes;
  if (doc.kind.is_grid()) {
    probes.emplace_back(doc.kind, z0);
  } else {
    for (Eigen::Index c = 0; c < z0.cols(); ++c) probes.push_back(LatentState::scalars(z0.col(c)));
  }
  const ErrorTable t = measure_discretization_error(doc.path, dts, doc.activation, probes, substeps);
  std::ostringstream os;
  os.precision(17);
  os << "dt,max_shift,layers,sup_error,ratio\n";
  for (const auto& r : t.rows) os << r.dt << "," << r.max_shift << "," << r.layers << "," << r.sup_error << "," << r.ratio << "\n";
  write_file(out, os.str());
  Manifest m("error-table");
  m.set("path", path_file);
  m.set("z0", z0_file);
  m.set("substeps", substeps);
  m.set("out", out);
  m.set("c1_estimate", t.c1_estimate);
  m.write(out + ".manifest");
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Continuous-depth network toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  std::string path_file, z0_file, out, scheme = "euler", suite = "all", config;
  int substeps = 256;
  double dt = 0.1;
  std::uint64_t seed = 0;
  std::vector<double> dts;

  auto* integrate = app.add_subcommand("integrate", "Integrate a parameter path with the reference solver");
  integrate->add_option("--path", path_file, "Path document (JSON)")->required();
  integrate->add_option("--z0", z0_file, "Initial states (CSV, header c0..c{D-1})")->required();
  integrate->add_option("--substeps", substeps, "RK4 substeps per segment")->check(CLI::PositiveNumber)->capture_default_str();
  integrate->add_option("--out", out, "Final states (CSV)")->required();

  auto* discretize = app.add_subcommand("discretize", "Compile a path into a network");
  discretize->add_option("--path", path_file, "Path document (JSON)")->required();
  discretize->add_option("--dt", dt, "Step size")->required()->check(CLI::PositiveNumber);
  discretize->add_option("--scheme", scheme, "euler (composition) or split (separation)")
      ->required()
      ->check(CLI::IsMember({"euler", "split"}));
  discretize->add_option("--out", out, "Model document (JSON)")->required();

  auto* verify_cmd = app.add_subcommand("verify", "Run property suites");
  verify_cmd->add_option("--suite", suite, "core|flow|discretize|conv|construct|all")->capture_default_str();
  verify_cmd->add_option("--seed", seed, "Random seed")->capture_default_str();
  verify_cmd->add_option("--out", out, "Also write the report here");

  auto* train = app.add_subcommand("train", "Fit a scalar function");
  train->add_option("--config", config, "Training config (JSON)")->required();

  auto* train_op = app.add_subcommand("train-operator", "Fit an operator between function spaces");
  train_op->add_option("--config", config, "Training config (JSON)")->required();

  auto* table = app.add_subcommand("error-table", "Discretization error against the reference flow");
  table->add_option("--path", path_file, "Path document (JSON)")->required();
  table->add_option("--z0", z0_file, "Probe states (CSV)")->required();
  table->add_option("--dt", dts, "Step sizes, strictly decreasing")->required();
  table->add_option("--substeps", substeps, "Reference substeps per segment")->check(CLI::PositiveNumber)->capture_default_str();
  table->add_option("--out", out, "Error table (CSV)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*integrate) return cmd_integrate(path_file, z0_file, substeps, out);
    if (*discretize) return cmd_discretize(path_file, dt, scheme, out);
    if (*verify_cmd) return cmd_verify(suite, seed, out);
    if (*train) return cmd_train(config);
    if (*train_op) return cmd_train_operator(config);
    if (*table) return cmd_error_table(path_file, dts, z0_file, substeps, out);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kNumeric;
  } catch (const DivergenceError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kNumeric;
  } catch (const Json::exception& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}
