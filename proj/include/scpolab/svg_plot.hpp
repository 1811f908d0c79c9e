#pragma once

#include <string>
#include <vector>

namespace scpolab {

struct SvgSeries {
  std::string label;
  std::vector<double> y;  // x is the index (epoch)
};

// Static single-file line chart; non-finite samples break the line.
void write_line_chart_svg(const std::string& path, const std::string& title,
                          const std::string& y_label, const std::vector<SvgSeries>& series);

}  // namespace scpolab
