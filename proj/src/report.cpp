#include "tosca/report.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "tosca/batch.hpp"

namespace tosca {

namespace {

std::string fixed(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// Shortest round-trip fixed-point decimal.
std::string number(double v) {
  char buf[64];
  for (int prec = 0; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*f", prec, v);
    if (std::strtod(buf, nullptr) == v) return buf;
  }
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

nlohmann::ordered_json config_json(const EngineConfig& c) {
  nlohmann::ordered_json j;
  j["r"] = c.r;
  j["lambda"] = c.optim.lambda_l1;
  j["l1_mode"] = to_string(c.optim.l1_mode);
  j["lr_max"] = c.optim.lr_max;
  j["lr_min"] = c.optim.lr_min;
  j["epochs"] = c.optim.epochs;
  j["batch_size"] = c.optim.batch_size;
  j["momentum"] = c.optim.momentum;
  j["adapter_act"] = to_string(c.luca.adapter_act);
  j["gate_act"] = to_string(c.luca.gate_act);
  j["gate_residual"] = c.luca.gate_residual;
  j["reversed"] = c.luca.reversed;
  j["normalize_entropy"] = c.normalize_entropy;
  j["priors"] = c.priors;
  return j;
}

}  // namespace

nlohmann::ordered_json report_to_json(const ScenarioReport& report, bool include_wall_time) {
  nlohmann::ordered_json j;
  j["method"] = to_string(report.method);
  j["seed"] = report.seed;
  j["dataset"] = report.dataset;
  j["config"] = config_json(report.config);
  j["splits"] = report.splits;
  auto stages = nlohmann::ordered_json::array();
  for (const auto& s : report.stages) {
    nlohmann::ordered_json st;
    st["index"] = s.index;
    st["A_b"] = s.accuracy;
    st["selection_accuracy"] = s.selection_accuracy ? nlohmann::ordered_json(*s.selection_accuracy) : nullptr;
    st["params_added"] = s.params_added;
    stages.push_back(std::move(st));
  }
  j["stages"] = std::move(stages);
  j["A_bar"] = report.average_accuracy;
  j["A_B"] = report.final_accuracy();
  j["params_per_task"] = report.params_per_task;
  nlohmann::ordered_json diag;
  diag["orthogonality"] = report.orthogonality ? nlohmann::ordered_json(*report.orthogonality) : nullptr;
  diag["sparsity"] = report.sparsity ? nlohmann::ordered_json(*report.sparsity) : nullptr;
  diag["feature_shift"] = report.feature_shift;
  j["diagnostics"] = std::move(diag);
  if (include_wall_time) j["wall_time_s"] = report.wall_time_s;
  return j;
}

ScenarioReport report_from_json(const nlohmann::json& j) {
  ScenarioReport r;
  r.method = parse_method(j.at("method").get<std::string>());
  r.seed = j.value("seed", std::uint64_t{0});
  r.dataset = j.value("dataset", std::string{});
  for (const auto& st : j.at("stages")) {
    StageResult s;
    s.index = st.at("index").get<std::size_t>();
    s.accuracy = st.at("A_b").get<double>();
    if (st.contains("selection_accuracy") && !st["selection_accuracy"].is_null()) {
      s.selection_accuracy = st["selection_accuracy"].get<double>();
    }
    s.params_added = st.value("params_added", std::size_t{0});
    r.stages.push_back(s);
  }
  r.average_accuracy = j.value("A_bar", average_accuracy(r.stages));
  r.params_per_task = j.value("params_per_task", std::size_t{0});
  r.wall_time_s = j.value("wall_time_s", 0.0);
  return r;
}

std::string report_to_csv(const ScenarioReport& report) {
  std::ostringstream out;
  out << "method,index,A_b,selection_accuracy,params_added\n";
  for (const auto& s : report.stages) {
    out << to_string(report.method) << ',' << s.index << ',' << number(s.accuracy) << ','
        << (s.selection_accuracy ? number(*s.selection_accuracy) : std::string{}) << ','
        << s.params_added << '\n';
  }
  return out.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

ReportFormat format_for(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".csv" ? ReportFormat::csv : ReportFormat::json;
}

void emit_report(const ScenarioReport& report, const std::filesystem::path& path, ReportFormat format) {
  if (format == ReportFormat::csv) {
    write_text(path, report_to_csv(report));
  } else {
    write_text(path, report_to_json(report).dump(2) + "\n");
  }
}

std::string render_plot(std::span<const ScenarioReport> reports) {
  if (reports.empty()) throw std::invalid_argument("plot needs at least one report");
  const std::size_t stages = reports.front().stages.size();
  for (const auto& r : reports) {
    if (r.stages.size() != stages) throw std::invalid_argument("plot: mismatched stage counts");
  }
  if (stages == 0) throw std::invalid_argument("plot: reports have no stages");

  constexpr double width = 640, height = 400;
  constexpr double left = 60, right = 160, top = 30, bottom = 50;
  const double plot_w = width - left - right;
  const double plot_h = height - top - bottom;
  auto x_of = [&](std::size_t stage) {
    return stages == 1 ? left + plot_w / 2
                       : left + plot_w * static_cast<double>(stage) / static_cast<double>(stages - 1);
  };
  auto y_of = [&](double acc) { return top + plot_h * (1.0 - std::clamp(acc, 0.0, 100.0) / 100.0); };

  static constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                            "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\"" << left + plot_w
      << "\" y2=\"" << top + plot_h << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\""
      << top + plot_h << "\" stroke=\"black\"/>\n";
  for (int tick = 0; tick <= 100; tick += 20) {
    const double y = y_of(tick);
    svg << "<line x1=\"" << left - 4 << "\" y1=\"" << fixed(y) << "\" x2=\"" << left << "\" y2=\""
        << fixed(y) << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << left - 8 << "\" y=\"" << fixed(y + 4)
        << "\" font-size=\"11\" text-anchor=\"end\">" << tick << "</text>\n";
  }
  for (std::size_t s = 0; s < stages; ++s) {
    svg << "<text x=\"" << fixed(x_of(s)) << "\" y=\"" << top + plot_h + 16
        << "\" font-size=\"11\" text-anchor=\"middle\">" << s + 1 << "</text>\n";
  }
  svg << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << height - 10
      << "\" font-size=\"12\" text-anchor=\"middle\">Stage</text>\n";
  svg << "<text x=\"15\" y=\"" << top + plot_h / 2 << "\" font-size=\"12\" text-anchor=\"middle\""
      << " transform=\"rotate(-90 15 " << top + plot_h / 2 << ")\">Top-1 accuracy (%)</text>\n";

  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    const char* color = kColors[i % std::size(kColors)];
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t s = 0; s < stages; ++s) {
      svg << (s ? " " : "") << fixed(x_of(s)) << ',' << fixed(y_of(r.stages[s].accuracy));
    }
    svg << "\"/>\n";
    for (std::size_t s = 0; s < stages; ++s) {
      svg << "<circle cx=\"" << fixed(x_of(s)) << "\" cy=\"" << fixed(y_of(r.stages[s].accuracy))
          << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    }
    const double ly = top + 10 + 18.0 * static_cast<double>(i);
    svg << "<line x1=\"" << left + plot_w + 15 << "\" y1=\"" << fixed(ly) << "\" x2=\""
        << left + plot_w + 35 << "\" y2=\"" << fixed(ly) << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << left + plot_w + 40 << "\" y=\"" << fixed(ly + 4) << "\" font-size=\"12\">"
        << to_string(r.method) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

void emit_plot(std::span<const ScenarioReport> reports, const std::filesystem::path& path) {
  write_text(path, render_plot(reports));
}

std::vector<SweepCell> run_sweep(const FeatureDataset& train, const FeatureDataset& test,
                                 const SplitPlan& splits, Method method, const EngineConfig& base,
                                 const SweepGrid& grid, std::uint64_t seed) {
  if (grid.lambdas.empty() || grid.ranks.empty()) throw std::invalid_argument("sweep: empty grid");
  const std::size_t cols = grid.ranks.size();
  return parallel_map<SweepCell>(grid.lambdas.size() * cols, [&](std::size_t i) {
    EngineConfig cfg = base;
    cfg.optim.lambda_l1 = grid.lambdas[i / cols];
    cfg.r = grid.ranks[i % cols];
    const auto result = run_scenario(train, test, splits, method, cfg, seed);
    const auto& rep = result.report;
    return SweepCell{cfg.optim.lambda_l1, cfg.r, rep.final_accuracy(), rep.average_accuracy,
                     rep.stages.back().selection_accuracy};
  });
}

std::string sweep_to_csv(std::span<const SweepCell> cells) {
  std::ostringstream out;
  out << "lambda,r,A_B,A_bar,selection_accuracy\n";
  for (const auto& c : cells) {
    out << number(c.lambda) << ',' << c.r << ',' << number(c.final_accuracy) << ','
        << number(c.average_accuracy) << ','
        << (c.selection_accuracy ? number(*c.selection_accuracy) : std::string{}) << '\n';
  }
  return out.str();
}

}  // namespace tosca
