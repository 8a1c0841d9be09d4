#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ncgl/ncmetrics.hpp"

namespace ncgl {

inline constexpr std::string_view kMetricsHeader =
    "step,graph_id,loss,overlap,nc1_h,nc1t_h,nc1_hA,nc1t_hA,trW_h,trB_h,trW_hA,trB_hA,snr,snr_agg,"
    "nc2_etf_w1,nc2_etf_w2,nc2_of_w1,nc2_of_w2,nc2_etf_h,nc2_of_h,nc2_etf_hA,nc2_of_hA,"
    "nc3_w1h,nc3_w2hA,nc3_etf_w1h,nc3_etf_w2hA,nc3_of_w1h,nc3_of_w2hA";

inline constexpr std::string_view kLayerwiseHeader = "layer,stage,graph_id,nc1_h,nc1t_h,trW,trB,ratio_trB,ratio_trW";

inline constexpr std::string_view kBoundHeader = "layer,trB_ratio,trB_lower,trB_upper,trW_ratio,trW_lower,trW_upper";

// Shortest round-trip decimal; +inf as "inf"; empty optional or NaN as an empty field.
std::string format_number(std::optional<double> value);

// One metrics-CSV row: the two key columns plus the numeric columns in header order.
struct MetricsRow {
  std::string step;
  std::string graph_id;
  std::vector<std::optional<double>> values;
};

MetricsRow metrics_row(std::string step, std::string graph_id, std::optional<double> loss,
                       std::optional<double> overlap, const NcReport& report);

// Column-wise mean and population standard deviation over the present entries.
std::pair<MetricsRow, MetricsRow> mean_std_rows(const std::string& step, std::span<const MetricsRow> rows);

struct GraphSnapshot {
  std::optional<double> loss;
  std::optional<double> overlap;
  NcReport report;
};

struct StepRecord {
  std::size_t step = 0;
  std::vector<GraphSnapshot> graphs;
};

// Per-graph rows (graph_id = index) followed by "mean" and "std" when there are several graphs.
std::vector<MetricsRow> trajectory_rows(std::span<const StepRecord> records);

struct LayerRow {
  std::size_t layer = 0;
  std::string stage;
  std::string graph_id;
  std::optional<double> nc1, nc1_tilde, tr_w, tr_b, ratio_tr_b, ratio_tr_w;
};

std::string render_metrics(std::span<const MetricsRow> rows);
std::string render_layers(std::span<const LayerRow> rows);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace ncgl
