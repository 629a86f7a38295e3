#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "agrostress/analysis.hpp"
#include "agrostress/sensitivity.hpp"

namespace agrostress::plots {

namespace detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// Comments may not contain "--".
inline std::string comment_safe(const std::string& s) {
  std::string out = s;
  for (std::size_t p = out.find("--"); p != std::string::npos; p = out.find("--")) out.replace(p, 2, "- ");
  return out;
}

// Blue (negative) through white to red (positive).
inline std::string diverging(double t) {
  t = std::clamp(t, -1.0, 1.0);
  const auto ch = [](double v) { return static_cast<int>(std::lround(255.0 * v)); };
  char buf[8];
  if (t >= 0.0)
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", 255, ch(1.0 - t), ch(1.0 - t));
  else
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", ch(1.0 + t), ch(1.0 + t), 255);
  return buf;
}

inline void header(std::ostream& out, double w, double h, const std::string& provenance) {
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  if (!provenance.empty()) out << "<!-- " << comment_safe(provenance) << " -->\n";
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << num(w) << "\" height=\"" << num(h)
      << "\" viewBox=\"0 0 " << num(w) << ' ' << num(h) << "\">\n";
  out << "<rect x=\"0\" y=\"0\" width=\"" << num(w) << "\" height=\"" << num(h) << "\" fill=\"#ffffff\"/>\n";
}

}  // namespace detail

// One coloured cell per matrix entry, rows in the given order (typically a
// ranking, most susceptible at the top). Colours are scaled by the largest
// absolute entry.
inline void heatmap_svg(const sensitivity::SensitivityMatrix& m, const std::vector<std::size_t>& row_order,
                        std::ostream& out, const std::string& provenance = "") {
  const double cell_w = 14.0;
  const double cell_h = std::clamp(600.0 / std::max<double>(1.0, static_cast<double>(m.num_rows())), 1.0, 14.0);
  const double left = 20.0, top = 40.0;
  const double w = left + cell_w * static_cast<double>(m.num_cols()) + 20.0;
  const double h = top + cell_h * static_cast<double>(row_order.size()) + 20.0;
  double vmax = 0.0;
  for (const auto& r : m.rows)
    for (double v : r) vmax = std::max(vmax, std::abs(v));
  const double scale = vmax > 0.0 ? 1.0 / vmax : 0.0;
  detail::header(out, w, h, provenance);
  out << "<text x=\"" << detail::num(left) << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"12\">"
      << detail::escape(m.kind) << " (" << detail::escape(m.columns) << ", max |value| " << detail::num(vmax)
      << ")</text>\n";
  for (std::size_t r = 0; r < row_order.size(); ++r) {
    const auto i = row_order[r];
    for (std::size_t t = 0; t < m.num_cols(); ++t) {
      out << "<rect class=\"cell\" x=\"" << detail::num(left + cell_w * static_cast<double>(t)) << "\" y=\""
          << detail::num(top + cell_h * static_cast<double>(r)) << "\" width=\"" << detail::num(cell_w)
          << "\" height=\"" << detail::num(cell_h) << "\" fill=\"" << detail::diverging(m.rows[i][t] * scale)
          << "\"><title>" << detail::escape(m.hybrid_ids[i]) << " c" << t << "</title></rect>\n";
    }
  }
  out << "</svg>\n";
}

// Position in ranking a against position in ranking b, with the identity line.
inline void scatter_svg(const analysis::RankComparison& c, std::ostream& out, const std::string& label_a = "a",
                        const std::string& label_b = "b", const std::string& provenance = "") {
  const double size = 400.0, margin = 50.0;
  const double n = std::max<double>(1.0, static_cast<double>(c.hybrid_ids.size()));
  const auto px = [&](double p) { return margin + (p - 1.0) / std::max(1.0, n - 1.0) * size; };
  const auto py = [&](double p) { return margin + size - (p - 1.0) / std::max(1.0, n - 1.0) * size; };
  detail::header(out, size + 2 * margin, size + 2 * margin, provenance);
  out << "<line class=\"identity\" x1=\"" << detail::num(px(1)) << "\" y1=\"" << detail::num(py(1)) << "\" x2=\""
      << detail::num(px(n)) << "\" y2=\"" << detail::num(py(n)) << "\" stroke=\"#888888\" stroke-dasharray=\"4 3\"/>\n";
  for (std::size_t i = 0; i < c.hybrid_ids.size(); ++i) {
    out << "<circle class=\"marker\" cx=\"" << detail::num(px(c.position_a[i])) << "\" cy=\""
        << detail::num(py(c.position_b[i])) << "\" r=\"2.5\" fill=\"#1f4e9c\"><title>"
        << detail::escape(c.hybrid_ids[i]) << "</title></circle>\n";
  }
  out << "<text x=\"" << detail::num(margin) << "\" y=\"30\" font-family=\"sans-serif\" font-size=\"12\">Spearman "
      << detail::num(c.spearman) << "</text>\n";
  out << "<text x=\"" << detail::num(margin + size / 2) << "\" y=\"" << detail::num(size + 2 * margin - 12)
      << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">" << detail::escape(label_a)
      << " position</text>\n";
  out << "<text x=\"14\" y=\"" << detail::num(margin + size / 2) << "\" font-family=\"sans-serif\" font-size=\"12\" "
      << "transform=\"rotate(-90 14 " << detail::num(margin + size / 2) << ")\" text-anchor=\"middle\">"
      << detail::escape(label_b) << " position</text>\n";
  out << "</svg>\n";
}

}  // namespace agrostress::plots
