#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tosca/engine.hpp"

namespace tosca {

enum class ReportFormat { json, csv };

/// Keys in fixed insertion order so identical reports serialize identically.
nlohmann::ordered_json report_to_json(const ScenarioReport& report, bool include_wall_time = true);

/// Reads back the fields a plot or summary needs (method, seed, stages,
/// averages, params).
ScenarioReport report_from_json(const nlohmann::json& j);

std::string report_to_csv(const ScenarioReport& report);

void emit_report(const ScenarioReport& report, const std::filesystem::path& path, ReportFormat format);

/// Picks the format from the extension (.csv, otherwise json).
ReportFormat format_for(const std::filesystem::path& path);

/// Accuracy-vs-stage line chart, one polyline per report.
std::string render_plot(std::span<const ScenarioReport> reports);
void emit_plot(std::span<const ScenarioReport> reports, const std::filesystem::path& path);

struct SweepCell {
  double lambda = 0.0;
  std::size_t r = 0;
  double final_accuracy = 0.0;
  double average_accuracy = 0.0;
  std::optional<double> selection_accuracy;
};

struct SweepGrid {
  std::vector<double> lambdas{0.0, 5e-5, 5e-4, 5e-3, 5e-2};
  std::vector<std::size_t> ranks{8, 16, 32, 48, 64};
};

/// Every (lambda, r) cell is an independent scenario; cells run in parallel
/// and come back in grid order (lambda-major).
std::vector<SweepCell> run_sweep(const FeatureDataset& train, const FeatureDataset& test,
                                 const SplitPlan& splits, Method method, const EngineConfig& base,
                                 const SweepGrid& grid, std::uint64_t seed);

std::string sweep_to_csv(std::span<const SweepCell> cells);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace tosca
