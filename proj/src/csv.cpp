#include "ncgl/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ncgl {

std::string format_number(std::optional<double> value) {
  if (!value || std::isnan(*value)) return {};
  if (std::isinf(*value)) return *value > 0 ? "inf" : "-inf";
  char buffer[64];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), *value);
  return std::string(buffer, result.ptr);
}

MetricsRow metrics_row(std::string step, std::string graph_id, std::optional<double> loss,
                       std::optional<double> overlap, const NcReport& r) {
  auto ratio = [](const std::optional<Ratio>& x) { return x ? x->as_optional() : std::nullopt; };
  return {std::move(step),
          std::move(graph_id),
          {loss,          overlap,        r.nc1_h,        r.nc1t_h,     r.nc1_ha,       r.nc1t_ha,   r.tr_w_h,
           r.tr_b_h,      r.tr_w_ha,      r.tr_b_ha,      ratio(r.snr_h), ratio(r.snr_ha), r.nc2_etf_w1, r.nc2_etf_w2,
           r.nc2_of_w1,   r.nc2_of_w2,    r.nc2_etf_h,    r.nc2_of_h,   r.nc2_etf_ha,   r.nc2_of_ha, r.nc3_w1h,
           r.nc3_w2ha,    r.nc3_etf_w1h,  r.nc3_etf_w2ha, r.nc3_of_w1h, r.nc3_of_w2ha}};
}

std::pair<MetricsRow, MetricsRow> mean_std_rows(const std::string& step, std::span<const MetricsRow> rows) {
  const std::size_t width = rows.empty() ? 0 : rows.front().values.size();
  MetricsRow mean{step, "mean", std::vector<std::optional<double>>(width)};
  MetricsRow stdev{step, "std", std::vector<std::optional<double>>(width)};
  for (std::size_t k = 0; k < width; ++k) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& row : rows) {
      if (row.values[k]) {
        sum += *row.values[k];
        ++count;
      }
    }
    if (count == 0) continue;
    const double m = sum / static_cast<double>(count);
    double sq = 0.0;
    for (const auto& row : rows)
      if (row.values[k]) sq += (*row.values[k] - m) * (*row.values[k] - m);
    mean.values[k] = m;
    stdev.values[k] = std::isfinite(m) ? std::sqrt(sq / static_cast<double>(count)) : std::nan("");
  }
  return {std::move(mean), std::move(stdev)};
}

std::vector<MetricsRow> trajectory_rows(std::span<const StepRecord> records) {
  std::vector<MetricsRow> out;
  for (const auto& record : records) {
    const std::string step = std::to_string(record.step);
    std::vector<MetricsRow> rows;
    for (std::size_t k = 0; k < record.graphs.size(); ++k) {
      const auto& g = record.graphs[k];
      rows.push_back(metrics_row(step, std::to_string(k), g.loss, g.overlap, g.report));
    }
    out.insert(out.end(), rows.begin(), rows.end());
    if (rows.size() > 1) {
      auto [mean, stdev] = mean_std_rows(step, rows);
      out.push_back(std::move(mean));
      out.push_back(std::move(stdev));
    }
  }
  return out;
}

std::string render_metrics(std::span<const MetricsRow> rows) {
  std::ostringstream out;
  out << kMetricsHeader << '\n';
  for (const auto& row : rows) {
    out << row.step << ',' << row.graph_id;
    for (const auto& v : row.values) out << ',' << format_number(v);
    out << '\n';
  }
  return out.str();
}

std::string render_layers(std::span<const LayerRow> rows) {
  std::ostringstream out;
  out << kLayerwiseHeader << '\n';
  for (const auto& r : rows) {
    out << r.layer << ',' << r.stage << ',' << r.graph_id << ',' << format_number(r.nc1) << ','
        << format_number(r.nc1_tilde) << ',' << format_number(r.tr_w) << ',' << format_number(r.tr_b) << ','
        << format_number(r.ratio_tr_b) << ',' << format_number(r.ratio_tr_w) << '\n';
  }
  return out.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

}  // namespace ncgl
