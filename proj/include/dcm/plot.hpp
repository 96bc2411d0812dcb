#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "dcm/instrument.hpp"
#include "dcm/masking.hpp"

namespace dcm {

enum class PlotKind { accuracy_curve, grad_err_curve, ratio_sweep, mask_density };
PlotKind parse_plot_kind(std::string_view name);

struct MetricsSeries {
  std::string source;  // file name, used only in error messages
  std::vector<MetricsRow> rows;
};

// Deterministic SVG: fixed canvas, fixed palette, no timestamps or ids.
// Throws ValidationError on empty input or an empty series.
std::string render_metrics_plot(PlotKind kind, const std::vector<MetricsSeries>& runs);
// Heatmap of one or more d x C masks (dark = kept).
std::string render_mask_density(const std::vector<MaskDump>& masks);

// Reads the inputs named by `inputs`, renders, and writes `out_path`. Nothing
// is written if reading or rendering fails.
void emit_plot(PlotKind kind, const std::vector<std::string>& inputs, const std::string& out_path);

}  // namespace dcm
