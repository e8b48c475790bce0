#include "cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "tosca/data.hpp"
#include "tosca/engine.hpp"
#include "tosca/gradcheck.hpp"
#include "tosca/report.hpp"

namespace tosca::cli {

namespace {

struct DataFlags {
  std::string data;
  std::string test;
  std::size_t init = 0;
  std::size_t inc = 10;
  std::uint64_t seed = kDefaultSplitSeed;
};

struct ModelFlags {
  std::size_t r = 48;
  double lambda = 5e-4;
  std::size_t epochs = 20;
  std::size_t batch = 48;
  double lr = 0.025;
  double lr_min = 0.0;
  double momentum = 0.0;
  std::string l1_mode = "subgradient";
  std::string adapter_act = to_string(LucaConfig{}.adapter_act);
  std::string gate_act = to_string(LucaConfig{}.gate_act);
  bool gate_residual = LucaConfig{}.gate_residual;
  bool reversed = false;
  bool no_entropy_norm = false;
};

void add_data_flags(CLI::App* cmd, DataFlags& f) {
  cmd->add_option("--data", f.data, "Training feature file (FTRSET01)")->required();
  cmd->add_option("--test", f.test, "Test feature file (default: <data stem>.test.ftr)");
  cmd->add_option("--init", f.init, "Classes in the first stage (m in B-m Inc-n)");
  cmd->add_option("--inc", f.inc, "Classes per incremental stage (n)")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", f.seed, "Seed for class shuffling and training");
}

void add_model_flags(CLI::App* cmd, ModelFlags& f) {
  cmd->add_option("--r", f.r, "Bottleneck dimension")->check(CLI::PositiveNumber);
  cmd->add_option("--lambda", f.lambda, "L1 strength on LuCA parameters")->check(CLI::NonNegativeNumber);
  cmd->add_option("--epochs", f.epochs, "Epochs per session");
  cmd->add_option("--batch", f.batch, "Mini-batch size")->check(CLI::PositiveNumber);
  cmd->add_option("--lr", f.lr, "Initial learning rate")->check(CLI::NonNegativeNumber);
  cmd->add_option("--lr-min", f.lr_min, "Final learning rate")->check(CLI::NonNegativeNumber);
  cmd->add_option("--momentum", f.momentum, "SGD momentum");
  cmd->add_option("--l1-mode", f.l1_mode, "subgradient or proximal")
      ->check(CLI::IsMember({"subgradient", "proximal"}));
  cmd->add_option("--adapter-act", f.adapter_act)->check(CLI::IsMember({"relu", "gelu", "sigmoid"}));
  cmd->add_option("--gate-act", f.gate_act)->check(CLI::IsMember({"relu", "gelu", "sigmoid"}));
  cmd->add_option("--gate-residual", f.gate_residual, "Use (1 + g) as the calibrator gate");
  cmd->add_flag("--reversed", f.reversed, "Compose as A(C(z))");
  cmd->add_flag("--no-entropy-norm", f.no_entropy_norm,
                "Do not normalize entropies by ln|Y_b| for unequal sessions");
}

EngineConfig to_engine_config(const ModelFlags& f) {
  EngineConfig cfg;
  cfg.r = f.r;
  cfg.optim.lambda_l1 = f.lambda;
  cfg.optim.epochs = f.epochs;
  cfg.optim.batch_size = f.batch;
  cfg.optim.lr_max = f.lr;
  cfg.optim.lr_min = f.lr_min;
  cfg.optim.momentum = f.momentum;
  cfg.optim.l1_mode = parse_l1_mode(f.l1_mode);
  cfg.luca.adapter_act = parse_activation(f.adapter_act);
  cfg.luca.gate_act = parse_activation(f.gate_act);
  cfg.luca.gate_residual = f.gate_residual;
  cfg.luca.reversed = f.reversed;
  cfg.normalize_entropy = !f.no_entropy_norm;
  cfg.optim.validate();
  return cfg;
}

std::filesystem::path default_test_path(const std::filesystem::path& data) {
  auto p = data;
  p.replace_extension();
  p += ".test.ftr";
  return p;
}

struct Loaded {
  FeatureDataset train;
  FeatureDataset test;
  SplitPlan plan;
};

Loaded load_scenario(const DataFlags& f) {
  Loaded l;
  l.train = load_features(f.data);
  const auto test_path = f.test.empty() ? default_test_path(f.data) : std::filesystem::path(f.test);
  if (!std::filesystem::exists(test_path)) {
    throw std::runtime_error("no test set: " + test_path.string() + " does not exist (pass --test)");
  }
  l.test = load_features(test_path);
  l.plan = make_splits(l.train.classes(), f.init, f.inc, f.seed);
  return l;
}

template <typename T>
std::vector<T> parse_list(const std::string& text) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::istringstream is(item);
    T v{};
    if (!(is >> v) || !is.eof()) throw std::invalid_argument("bad list entry: " + item);
    out.push_back(v);
  }
  if (out.empty()) throw std::invalid_argument("empty list: " + text);
  return out;
}

void print_summary(const ScenarioReport& r, std::ostream& out) {
  char line[160];
  std::snprintf(line, sizeof line, "%-10s A_B=%6.2f  A_bar=%6.2f  stages=%zu  params/task=%zu\n",
                to_string(r.method), r.final_accuracy(), r.average_accuracy, r.stages.size(),
                r.params_per_task);
  out << line;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Token-level continual learning with per-session LuCA modules", "tosca"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "Write a synthetic Gaussian train/test feature pair");
  SynthParams sp;
  std::string synth_out, synth_test_out;
  synth->add_option("--out", synth_out, "Training feature file")->required();
  synth->add_option("--test-out", synth_test_out, "Test feature file (default: <out stem>.test.ftr)");
  synth->add_option("--d", sp.d, "Feature dimension");
  synth->add_option("--classes", sp.num_classes, "Number of classes");
  synth->add_option("--n-train", sp.n_train, "Training samples per class");
  synth->add_option("--n-test", sp.n_test, "Test samples per class");
  synth->add_option("--separation", sp.separation, "Norm of every class mean");
  synth->add_option("--sigma", sp.sigma, "Per-dimension noise standard deviation");
  synth->add_option("--seed", sp.seed, "Generator seed");

  // run
  auto* run = app.add_subcommand("run", "Run one class-incremental scenario");
  DataFlags run_data;
  ModelFlags run_model;
  std::string method = "tosca", run_out, run_plot, run_bank;
  add_data_flags(run, run_data);
  add_model_flags(run, run_model);
  run->add_option("--method", method)->check(
      CLI::IsMember({"tosca", "tosca_r", "finetune", "joint", "simplecil"}));
  run->add_option("--out", run_out, "Report path (.json or .csv)");
  run->add_option("--plot", run_plot, "SVG accuracy curve");
  run->add_option("--bank", run_bank, "Save the trained module bank (tosca, tosca_r)");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Grid over lambda x r; one CSV of final accuracies");
  DataFlags sweep_data;
  ModelFlags sweep_model;
  std::string sweep_method = "tosca", sweep_out, lambdas_text, ranks_text;
  add_data_flags(sweep, sweep_data);
  add_model_flags(sweep, sweep_model);
  sweep->add_option("--method", sweep_method)->check(CLI::IsMember({"tosca", "tosca_r"}));
  sweep->add_option("--lambdas", lambdas_text, "Comma-separated lambda values");
  sweep->add_option("--ranks", ranks_text, "Comma-separated r values");
  sweep->add_option("--out", sweep_out, "CSV path")->required();

  // gradcheck
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of the LuCA backward pass");
  GradCheckOptions gc;
  double gc_tol = 1e-4;
  gradcheck->add_option("--trials", gc.trials, "Random modules to check");
  gradcheck->add_option("--seed", gc.seed);
  gradcheck->add_option("--tol", gc_tol, "Maximum accepted relative error");

  // report
  auto* report = app.add_subcommand("report", "Combine JSON reports into a plot and/or CSV");
  std::vector<std::string> report_in;
  std::string report_plot, report_csv;
  report->add_option("--in", report_in, "JSON report(s)")->required();
  report->add_option("--plot", report_plot, "SVG output");
  report->add_option("--csv", report_csv, "CSV output (one row per method and stage)");

  std::vector<const char*> argv{"tosca"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }

  try {
    if (synth->parsed()) {
      const auto [train, test] = synth_gaussian(sp);
      const auto test_path =
          synth_test_out.empty() ? default_test_path(synth_out) : std::filesystem::path(synth_test_out);
      save_features(train, synth_out);
      save_features(test, test_path);
      out << "wrote " << synth_out << " (" << train.size() << " samples) and " << test_path.string()
          << " (" << test.size() << " samples)\n";
    } else if (run->parsed()) {
      const auto data = load_scenario(run_data);
      const auto cfg = to_engine_config(run_model);
      auto m = parse_method(method);
      if (m == Method::tosca && run_model.reversed) m = Method::tosca_r;
      const auto result = run_scenario(data.train, data.test, data.plan, m, cfg, run_data.seed);
      print_summary(result.report, out);
      if (!run_out.empty()) emit_report(result.report, run_out, format_for(run_out));
      if (!run_plot.empty()) emit_plot(std::span(&result.report, 1), run_plot);
      if (!run_bank.empty()) {
        if (!result.bank) throw std::runtime_error("--bank needs a bank-based method (tosca, tosca_r)");
        save_bank(*result.bank, run_bank);
      }
    } else if (sweep->parsed()) {
      const auto data = load_scenario(sweep_data);
      const auto cfg = to_engine_config(sweep_model);
      SweepGrid grid;
      if (!lambdas_text.empty()) grid.lambdas = parse_list<double>(lambdas_text);
      if (!ranks_text.empty()) grid.ranks = parse_list<std::size_t>(ranks_text);
      const auto cells = run_sweep(data.train, data.test, data.plan, parse_method(sweep_method), cfg,
                                   grid, sweep_data.seed);
      write_text(sweep_out, sweep_to_csv(cells));
      out << "wrote " << cells.size() << " sweep cells to " << sweep_out << "\n";
    } else if (gradcheck->parsed()) {
      const auto result = run_gradcheck(gc);
      char line[128];
      std::snprintf(line, sizeof line, "max relative error %.3e over %zu modules (tolerance %.1e)\n",
                    result.max_rel_error, result.trials.size(), gc_tol);
      out << line;
      if (result.max_rel_error > gc_tol) {
        err << "error: gradient check failed\n";
        return kExitFailure;
      }
      out << "gradient check passed\n";
    } else if (report->parsed()) {
      std::vector<ScenarioReport> reports;
      for (const auto& path : report_in) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open " + path);
        reports.push_back(report_from_json(nlohmann::json::parse(in)));
        print_summary(reports.back(), out);
      }
      if (!report_plot.empty()) emit_plot(reports, report_plot);
      if (!report_csv.empty()) {
        std::string text;
        for (std::size_t i = 0; i < reports.size(); ++i) {
          auto csv = report_to_csv(reports[i]);
          if (i > 0) csv = csv.substr(csv.find('\n') + 1);
          text += csv;
        }
        write_text(report_csv, text);
      }
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace tosca::cli
