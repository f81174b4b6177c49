#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fwal/mdp.hpp"

namespace fwal::harness {

namespace detail {
using fwal::detail::fail;
}  // namespace detail

/// Writes `content` to a temporary sibling and renames it over `path`.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    if (!out.flush()) throw std::runtime_error("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

/// Mean and sample standard deviation of the error per iteration, one column pair per solver.
struct SummaryTable {
  std::vector<std::string> solvers;
  std::vector<std::size_t> t;
  /// mean[solver][row], std[solver][row].
  std::vector<std::vector<double>> mean;
  std::vector<std::vector<double>> std;

  /// series[run][t] for t = 0..T; shorter runs are extended with their last value.
  static std::vector<double> column_mean(const std::vector<std::vector<double>>& series, std::size_t t) {
    std::vector<double> out;
    for (const auto& s : series) out.push_back(s.at(std::min(t, s.size() - 1)));
    return out;
  }

  void add_solver(const std::string& name, const std::vector<std::vector<double>>& series, std::size_t iterations) {
    if (series.empty()) detail::fail("solver ", name, " has no runs");
    if (t.empty())
      for (std::size_t i = 0; i <= iterations; ++i) t.push_back(i);
    solvers.push_back(name);
    std::vector<double> m, s;
    for (std::size_t i : t) {
      const auto v = column_mean(series, i);
      double mu = 0.0;
      for (double x : v) mu += x;
      mu /= static_cast<double>(v.size());
      double var = 0.0;
      for (double x : v) var += (x - mu) * (x - mu);
      var = v.size() > 1 ? var / static_cast<double>(v.size() - 1) : 0.0;
      m.push_back(mu);
      s.push_back(std::sqrt(var));
    }
    mean.push_back(std::move(m));
    std.push_back(std::move(s));
  }

  std::string to_csv() const {
    std::ostringstream os;
    os << 't';
    for (const auto& s : solvers) os << ',' << s << "_mean," << s << "_std";
    os << '\n' << std::setprecision(17);
    for (std::size_t r = 0; r < t.size(); ++r) {
      os << t[r];
      for (std::size_t i = 0; i < solvers.size(); ++i) os << ',' << mean[i][r] << ',' << std[i][r];
      os << '\n';
    }
    return os.str();
  }

  static SummaryTable from_csv(std::istream& is) {
    SummaryTable out;
    std::string line;
    if (!std::getline(is, line)) detail::fail("summary CSV is empty");
    std::stringstream header(line);
    std::string cell;
    std::getline(header, cell, ',');
    if (cell != "t") detail::fail("summary CSV must start with a t column");
    while (std::getline(header, cell, ',')) {
      const auto suffix = cell.rfind("_mean");
      if (suffix == std::string::npos || suffix + 5 != cell.size()) detail::fail("unexpected summary column ", cell);
      out.solvers.push_back(cell.substr(0, suffix));
      if (!std::getline(header, cell, ',')) detail::fail("summary CSV is missing a std column");
    }
    out.mean.resize(out.solvers.size());
    out.std.resize(out.solvers.size());
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      std::stringstream row(line);
      std::getline(row, cell, ',');
      out.t.push_back(std::stoul(cell));
      for (std::size_t i = 0; i < out.solvers.size(); ++i) {
        std::getline(row, cell, ',');
        out.mean[i].push_back(std::stod(cell));
        std::getline(row, cell, ',');
        out.std[i].push_back(std::stod(cell));
      }
    }
    return out;
  }
};

namespace detail {

inline std::string fmt(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << v;
  return os.str();
}

}  // namespace detail

/// Mean error per solver with a +-1 std band on a log-scale y axis.
inline std::string render_svg(const SummaryTable& table, const std::string& title) {
  constexpr double width = 720, height = 440, left = 70, right = 150, top = 40, bottom = 50;
  const double plot_w = width - left - right, plot_h = height - top - bottom;
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (std::size_t i = 0; i < table.solvers.size(); ++i)
    for (std::size_t r = 0; r < table.t.size(); ++r) {
      const double m = table.mean[i][r], s = table.std[i][r];
      if (m > 0.0) lo = std::min(lo, m);
      if (m - s > 0.0) lo = std::min(lo, m - s);
      hi = std::max(hi, m + s);
    }
  if (!(hi > 0.0)) hi = 1.0;
  if (!std::isfinite(lo)) lo = hi / 10.0;
  const double y0 = std::floor(std::log10(lo)), y1 = std::max(y0 + 1.0, std::ceil(std::log10(hi)));
  const double t_max = table.t.empty() ? 1.0 : std::max<double>(1.0, static_cast<double>(table.t.back()));
  const double floor_value = std::pow(10.0, y0);

  auto px = [&](double t) { return left + plot_w * t / t_max; };
  auto py = [&](double v) {
    const double lv = std::log10(std::max(v, floor_value));
    return top + plot_h * (1.0 - (lv - y0) / (y1 - y0));
  };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << left + plot_w / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << title
     << "</text>\n";
  for (double e = y0; e <= y1; e += 1.0) {
    const double y = py(std::pow(10.0, e));
    os << "<line x1=\"" << left << "\" x2=\"" << left + plot_w << "\" y1=\"" << detail::fmt(y) << "\" y2=\""
       << detail::fmt(y) << "\" stroke=\"#ddd\"/>\n";
    os << "<text x=\"" << left - 8 << "\" y=\"" << detail::fmt(y + 4) << "\" text-anchor=\"end\">1e"
       << static_cast<int>(e) << "</text>\n";
  }
  const std::size_t x_ticks = 5;
  for (std::size_t i = 0; i <= x_ticks; ++i) {
    const double t = t_max * static_cast<double>(i) / x_ticks;
    os << "<text x=\"" << detail::fmt(px(t)) << "\" y=\"" << top + plot_h + 18 << "\" text-anchor=\"middle\">"
       << std::llround(t) << "</text>\n";
  }
  os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << plot_w << "\" height=\"" << plot_h
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  os << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << height - 12 << "\" text-anchor=\"middle\">iteration</text>\n";
  os << "<text transform=\"translate(18," << top + plot_h / 2
     << ") rotate(-90)\" text-anchor=\"middle\">||Phi_E - Phi_t||</text>\n";

  for (std::size_t i = 0; i < table.solvers.size(); ++i) {
    const char* color = colors[i % std::size(colors)];
    os << "<polygon fill=\"" << color << "\" fill-opacity=\"0.18\" stroke=\"none\" points=\"";
    for (std::size_t r = 0; r < table.t.size(); ++r)
      os << detail::fmt(px(static_cast<double>(table.t[r]))) << ',' << detail::fmt(py(table.mean[i][r] + table.std[i][r]))
         << ' ';
    for (std::size_t r = table.t.size(); r-- > 0;)
      os << detail::fmt(px(static_cast<double>(table.t[r]))) << ',' << detail::fmt(py(table.mean[i][r] - table.std[i][r]))
         << ' ';
    os << "\"/>\n<polyline fill=\"none\" stroke-width=\"2\" stroke=\"" << color << "\" points=\"";
    for (std::size_t r = 0; r < table.t.size(); ++r)
      os << detail::fmt(px(static_cast<double>(table.t[r]))) << ',' << detail::fmt(py(table.mean[i][r])) << ' ';
    os << "\"/>\n";
    const double ly = top + 16 + 20 * static_cast<double>(i);
    os << "<line x1=\"" << left + plot_w + 12 << "\" x2=\"" << left + plot_w + 36 << "\" y1=\"" << ly << "\" y2=\""
       << ly << "\" stroke=\"" << color << "\" stroke-width=\"3\"/>\n";
    os << "<text x=\"" << left + plot_w + 42 << "\" y=\"" << ly + 4 << "\">" << table.solvers[i] << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace fwal::harness
