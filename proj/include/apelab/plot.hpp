#pragma once

// SVG rendering of experiment outputs.
//
//   figure2: reads an aggregate CSV. Mean return in grey with standard-error
//            bars; mean tracked values in green (tracked_value_1) and red
//            (tracked_value_2).
//   figure5: reads one or more run CSVs. One green and one red curve per seed,
//            mean return over seeds in grey.
//
// Long series are averaged into at most kMaxPlotPoints bins. Output depends
// only on the input bytes.

#include "apelab/records.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace apelab {

enum class PlotStyle { Figure2, Figure5 };

/// "figure2", "figure5".
std::optional<PlotStyle> parse_plot_style(std::string_view name);

inline constexpr std::size_t kMaxPlotPoints = 400;

struct PlotOptions {
  std::string title;
  std::string tracked_1_label = "tracked_value_1";
  std::string tracked_2_label = "tracked_value_2";
};

std::string render_figure2(const std::vector<AggregateRow>& rows, const PlotOptions& options);
std::string render_figure5(const RunLog& records, const PlotOptions& options);

/// Reads the inputs, renders, then writes `output`. Throws (and writes
/// nothing) on schema errors or when the inputs hold no data rows.
void emit_plot(const std::vector<std::filesystem::path>& inputs, PlotStyle style,
               const std::filesystem::path& output, const PlotOptions& options = {});

}  // namespace apelab
