#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "spoofprint/corpus.hpp"
#include "spoofprint/error.hpp"
#include "spoofprint/eval.hpp"
#include "spoofprint/features.hpp"

namespace spoofprint {

namespace detail {

inline std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

inline std::string xml_escape(std::string_view s) {
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

inline std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace detail

/// One EER value rendered with one decimal, as in the published tables.
inline std::string format_eer(double eer) { return detail::fmt("%.1f", eer); }

// ---- distribution plots ----

struct Series {
  std::string name;
  std::vector<double> values;
};

struct Histogram {
  double lo = 0.0;
  double hi = 1.0;
  std::vector<double> density;  // fraction of the series' values per bin; sums to 1
};

/// Equal-width bins over [lo, hi]; values outside are clamped into the edge bins.
inline Histogram compute_histogram(const std::vector<double>& values, std::size_t bins, double lo, double hi) {
  if (bins < 2) throw DataError("histogram needs at least 2 bins");
  if (values.empty()) throw DataError("histogram of an empty series");
  Histogram h{lo, hi, std::vector<double>(bins, 0.0)};
  const double width = hi > lo ? (hi - lo) / static_cast<double>(bins) : 1.0;
  for (double v : values) {
    auto b = static_cast<long long>(std::floor((v - lo) / width));
    b = std::clamp<long long>(b, 0, static_cast<long long>(bins) - 1);
    h.density[static_cast<std::size_t>(b)] += 1.0;
  }
  for (double& d : h.density) d /= static_cast<double>(values.size());
  return h;
}

struct DistributionPlot {
  std::string title;
  std::string x_label = "value";
  std::string y_label = "relative frequency";
  std::size_t bins = 30;
  std::optional<double> x_min;  // default: data range
  std::optional<double> x_max;
  std::optional<double> threshold;  // dotted vertical marker
};

/// Self-contained SVG with one normalised histogram polyline per series.
/// Each polyline carries its bin densities in a data-density attribute.
inline std::string render_distribution_svg(const std::vector<Series>& series, const DistributionPlot& plot) {
  if (series.empty()) throw DataError("distribution plot needs at least one series");
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& s : series) {
    if (s.values.empty()) throw DataError("distribution plot: series '" + s.name + "' is empty");
    for (double v : s.values) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  lo = plot.x_min.value_or(lo);
  hi = plot.x_max.value_or(hi);
  if (!(hi > lo)) hi = lo + 1.0;

  std::vector<Histogram> hists;
  double y_max = 0.0;
  for (const auto& s : series) {
    hists.push_back(compute_histogram(s.values, plot.bins, lo, hi));
    for (double d : hists.back().density) y_max = std::max(y_max, d);
  }
  if (y_max <= 0.0) y_max = 1.0;

  constexpr double W = 640, H = 400, left = 60, right = 20, top = 40, bottom = 50;
  const double pw = W - left - right, ph = H - top - bottom;
  auto sx = [&](double x) { return left + (x - lo) / (hi - lo) * pw; };
  auto sy = [&](double y) { return top + ph - y / y_max * ph; };
  static constexpr std::array<const char*, 8> kColors = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                                          "#9467bd", "#8c564b", "#e377c2", "#17becf"};
  using detail::fmt;

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << W << "\" height=\"" << H
      << "\" viewBox=\"0 0 " << W << ' ' << H << "\">\n"
      << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  if (!plot.title.empty())
    svg << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">"
        << detail::xml_escape(plot.title) << "</text>\n";
  svg << "<line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\"" << left + pw << "\" y2=\"" << top + ph
      << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + ph
      << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = lo + (hi - lo) * i / 4.0;
    const double yv = y_max * i / 4.0;
    svg << "<text x=\"" << fmt("%.2f", sx(xv)) << "\" y=\"" << top + ph + 18
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << fmt("%.3g", xv) << "</text>\n";
    svg << "<text x=\"" << left - 6 << "\" y=\"" << fmt("%.2f", sy(yv) + 4)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << fmt("%.2g", yv) << "</text>\n";
  }
  svg << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 10
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" << detail::xml_escape(plot.x_label)
      << "</text>\n"
      << "<text x=\"15\" y=\"" << top + ph / 2 << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
      << "font-size=\"13\" transform=\"rotate(-90 15 " << top + ph / 2 << ")\">" << detail::xml_escape(plot.y_label)
      << "</text>\n";

  const double bin_w = (hi - lo) / static_cast<double>(plot.bins);
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kColors[s % kColors.size()];
    std::string points, densities;
    for (std::size_t b = 0; b < plot.bins; ++b) {
      const double xc = lo + (static_cast<double>(b) + 0.5) * bin_w;
      points += (b ? " " : "") + fmt("%.2f", sx(xc)) + "," + fmt("%.2f", sy(hists[s].density[b]));
      densities += (b ? "," : "") + fmt("%.6g", hists[s].density[b]);
    }
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" data-series=\""
        << detail::xml_escape(series[s].name) << "\" data-density=\"" << densities << "\" points=\"" << points
        << "\"/>\n";
    svg << "<text x=\"" << left + pw - 4 << "\" y=\"" << top + 14 + 16 * static_cast<double>(s)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\" fill=\"" << color << "\">"
        << detail::xml_escape(series[s].name) << "</text>\n";
  }
  if (plot.threshold && *plot.threshold >= lo && *plot.threshold <= hi) {
    const double x = sx(*plot.threshold);
    svg << "<line class=\"threshold\" x1=\"" << fmt("%.2f", x) << "\" y1=\"" << top << "\" x2=\"" << fmt("%.2f", x)
        << "\" y2=\"" << top + ph << "\" stroke=\"black\" stroke-dasharray=\"3,3\"/>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

inline void emit_distribution_svg(const std::vector<Series>& series, const DistributionPlot& plot,
                                  const std::filesystem::path& out) {
  detail::write_text(out, render_distribution_svg(series, plot));
}

// ---- OOD heatmap ----

struct Rgb {
  int r, g, b;
  bool operator==(const Rgb&) const = default;
};

/// Green at EER <= 10, yellow at 35, red at >= 50; linear in between. The green
/// channel never increases with EER.
inline Rgb eer_color(double eer) {
  constexpr Rgb green{99, 210, 120}, yellow{250, 210, 90}, red{230, 80, 70};
  auto mix = [](Rgb a, Rgb b, double t) {
    return Rgb{static_cast<int>(std::lround(a.r + (b.r - a.r) * t)),
               static_cast<int>(std::lround(a.g + (b.g - a.g) * t)),
               static_cast<int>(std::lround(a.b + (b.b - a.b) * t))};
  };
  if (!(eer > 10.0)) return green;
  if (eer >= 50.0) return red;
  if (eer <= 35.0) return mix(green, yellow, (eer - 10.0) / 25.0);
  return mix(yellow, red, (eer - 35.0) / 15.0);
}

inline std::string feature_label(const std::optional<std::size_t>& idx) {
  return idx ? "F" + std::to_string(*idx) : std::string("all");
}

inline std::string render_heatmap_html(const OodMatrix& m, const std::string& title = "Out-of-domain EER (%)",
                                       const FeatureRegistry& registry = default_registry()) {
  auto is_dev = [](AttackId a) { return attack_metadata(a).partition == Partition::dev; };
  std::ostringstream html;
  html << "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n<title>"
       << detail::xml_escape(title) << "</title>\n<style>\n"
       << "body { font-family: sans-serif; }\n"
       << "table { border-collapse: collapse; font-size: 12px; }\n"
       << "th, td { border: 1px solid #ccc; padding: 3px 6px; text-align: center; }\n"
       << "th.row { text-align: left; font-weight: normal; white-space: nowrap; }\n"
       << "td.id { outline: 2px solid black; outline-offset: -2px; font-weight: bold; }\n"
       << ".qsep-left { border-left: 3px solid black; }\n"
       << ".qsep-top { border-top: 3px solid black; }\n"
       << "</style>\n</head>\n<body>\n<h1>" << detail::xml_escape(title) << "</h1>\n"
       << "<p>Rows: training attack and feature. Columns: evaluation attack. Bold outlined cells are in-domain.</p>\n"
       << "<table>\n<tr><th>train</th><th>system</th><th>feature</th>";
  for (std::size_t c = 0; c < m.cols.size(); ++c) {
    const bool sep = c > 0 && is_dev(m.cols[c]) && !is_dev(m.cols[c - 1]);
    html << "<th" << (sep ? " class=\"qsep-left\"" : "") << " title=\""
         << detail::xml_escape(attack_metadata(m.cols[c]).system_name) << "\">" << m.cols[c].str() << "</th>";
  }
  html << "</tr>\n";
  for (std::size_t r = 0; r < m.rows.size(); ++r) {
    const auto& key = m.rows[r];
    const bool row_sep = r > 0 && is_dev(key.train_attack) && !is_dev(m.rows[r - 1].train_attack);
    const auto info = attack_metadata(key.train_attack);
    const std::string feat_title = key.feature_index ? registry[*key.feature_index].name : "all implemented features";
    html << "<tr" << (row_sep ? " class=\"qsep-top\"" : "") << "><th class=\"row\">" << key.train_attack.str()
         << "</th><th class=\"row\">" << detail::xml_escape(info.system_name) << "</th><th class=\"row\" title=\""
         << detail::xml_escape(feat_title) << "\">" << feature_label(key.feature_index) << "</th>";
    for (std::size_t c = 0; c < m.cols.size(); ++c) {
      const double v = m.cells[r][c];
      const auto col = eer_color(v);
      std::string cls;
      if (m.cols[c] == key.train_attack) cls += "id";
      if (c > 0 && is_dev(m.cols[c]) && !is_dev(m.cols[c - 1])) cls += cls.empty() ? "qsep-left" : " qsep-left";
      if (row_sep) cls += cls.empty() ? "qsep-top" : " qsep-top";
      html << "<td" << (cls.empty() ? "" : " class=\"" + cls + "\"") << " style=\"background-color: rgb(" << col.r
           << ',' << col.g << ',' << col.b << ")\">" << format_eer(v) << "</td>";
    }
    html << "</tr>\n";
  }
  html << "</table>\n</body>\n</html>\n";
  return html.str();
}

inline void emit_heatmap_html(const OodMatrix& m, const std::filesystem::path& out,
                              const std::string& title = "Out-of-domain EER (%)") {
  detail::write_text(out, render_heatmap_html(m, title));
}

// ---- tables ----

inline std::string id_table_csv(const IdResult& id, const FeatureRegistry& registry = default_registry()) {
  std::string out = "attack,system,feature,feature_name,train_eer,test_eer\n";
  for (const auto& r : id.rows) {
    out += r.attack.str() + "," + detail::csv_field(attack_metadata(r.attack).system_name) + ",F" +
           std::to_string(r.feature_index) + "," + detail::csv_field(registry[r.feature_index].name) + "," +
           format_eer(r.train_eer) + "," + format_eer(r.test_eer) + "\n";
  }
  return out;
}

inline nlohmann::ordered_json id_table_json(const IdResult& id) {
  auto rows = nlohmann::ordered_json::array();
  for (const auto& r : id.rows) {
    nlohmann::ordered_json j;
    j["attack"] = r.attack.str();
    j["feature"] = r.feature_index;
    j["train_eer"] = r.train_eer;
    j["test_eer"] = r.test_eer;
    rows.push_back(std::move(j));
  }
  return rows;
}

inline std::vector<IdRow> id_rows_from_json(const nlohmann::json& j) {
  std::vector<IdRow> rows;
  try {
    for (const auto& r : j)
      rows.push_back({AttackId::parse(r.at("attack").get<std::string>()), r.at("feature").get<std::size_t>(),
                      r.at("train_eer").get<double>(), r.at("test_eer").get<double>()});
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("id table: ") + e.what());
  }
  return rows;
}

inline std::string ood_matrix_csv(const OodMatrix& m) {
  std::string out = "train_attack,feature";
  for (const auto& c : m.cols) out += "," + c.str();
  out += "\n";
  for (std::size_t r = 0; r < m.rows.size(); ++r) {
    out += m.rows[r].train_attack.str() + "," + feature_label(m.rows[r].feature_index);
    for (double v : m.cells[r]) out += "," + format_eer(v);
    out += "\n";
  }
  return out;
}

inline nlohmann::ordered_json ood_matrix_json(const OodMatrix& m) {
  nlohmann::ordered_json j;
  auto cols = nlohmann::ordered_json::array();
  for (const auto& c : m.cols) cols.push_back(c.str());
  j["cols"] = std::move(cols);
  auto rows = nlohmann::ordered_json::array();
  for (std::size_t r = 0; r < m.rows.size(); ++r) {
    nlohmann::ordered_json row;
    row["train_attack"] = m.rows[r].train_attack.str();
    row["feature"] = m.rows[r].feature_index ? nlohmann::ordered_json(*m.rows[r].feature_index)
                                             : nlohmann::ordered_json(nullptr);
    row["eer"] = m.cells[r];
    rows.push_back(std::move(row));
  }
  j["rows"] = std::move(rows);
  return j;
}

inline OodMatrix ood_matrix_from_json(const nlohmann::json& j) {
  try {
    OodMatrix m;
    for (const auto& c : j.at("cols")) m.cols.push_back(AttackId::parse(c.get<std::string>()));
    for (const auto& row : j.at("rows")) {
      std::optional<std::size_t> feat;
      if (!row.at("feature").is_null()) feat = row.at("feature").get<std::size_t>();
      m.rows.push_back({AttackId::parse(row.at("train_attack").get<std::string>()), feat});
      m.cells.push_back(row.at("eer").get<std::vector<double>>());
      if (m.cells.back().size() != m.cols.size()) throw DataError("ood matrix: ragged row");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("ood matrix: ") + e.what());
  }
}

/// One aggregate table per front-end, e.g. {"single-feature", ...}, {"all-feature", ...}.
struct FrontEndAggregates {
  std::string front_end;
  Aggregates aggregates;
};

inline std::string aggregates_csv(const std::vector<FrontEndAggregates>& tables) {
  std::string out = "attack,front_end,id_eer,ood_eer\n";
  for (const auto& t : tables)
    for (const auto& a : t.aggregates.per_attack)
      out += a.attack.str() + "," + detail::csv_field(t.front_end) + "," + format_eer(a.id_eer) + "," +
             (a.ood_eer ? format_eer(*a.ood_eer) : std::string()) + "\n";
  return out;
}

inline nlohmann::ordered_json aggregates_json(const std::vector<FrontEndAggregates>& tables) {
  auto quadrant = [](const QuadrantStat& q) {
    nlohmann::ordered_json j;
    j["mean"] = q.mean ? nlohmann::ordered_json(*q.mean) : nlohmann::ordered_json(nullptr);
    j["stddev"] = q.stddev ? nlohmann::ordered_json(*q.stddev) : nlohmann::ordered_json(nullptr);
    j["cells"] = q.cells;
    return j;
  };
  auto out = nlohmann::ordered_json::array();
  for (const auto& t : tables) {
    nlohmann::ordered_json j;
    j["front_end"] = t.front_end;
    auto rows = nlohmann::ordered_json::array();
    for (const auto& a : t.aggregates.per_attack) {
      nlohmann::ordered_json r;
      r["attack"] = a.attack.str();
      r["id_eer"] = a.id_eer;
      r["ood_eer"] = a.ood_eer ? nlohmann::ordered_json(*a.ood_eer) : nlohmann::ordered_json(nullptr);
      rows.push_back(std::move(r));
    }
    j["per_attack"] = std::move(rows);
    j["quadrants"] = {{"train_train", quadrant(t.aggregates.train_train)},
                      {"dev_dev", quadrant(t.aggregates.dev_dev)},
                      {"cross", quadrant(t.aggregates.cross)}};
    out.push_back(std::move(j));
  }
  return out;
}

inline std::vector<FrontEndAggregates> aggregates_from_json(const nlohmann::json& j) {
  auto opt = [](const nlohmann::json& v) { return v.is_null() ? std::optional<double>() : v.get<double>(); };
  auto quadrant = [&](const nlohmann::json& q) {
    return QuadrantStat{opt(q.at("mean")), opt(q.at("stddev")), q.at("cells").get<std::size_t>()};
  };
  try {
    std::vector<FrontEndAggregates> out;
    for (const auto& t : j) {
      FrontEndAggregates fe;
      fe.front_end = t.at("front_end").get<std::string>();
      for (const auto& r : t.at("per_attack"))
        fe.aggregates.per_attack.push_back(
            {AttackId::parse(r.at("attack").get<std::string>()), r.at("id_eer").get<double>(), opt(r.at("ood_eer"))});
      const auto& q = t.at("quadrants");
      fe.aggregates.train_train = quadrant(q.at("train_train"));
      fe.aggregates.dev_dev = quadrant(q.at("dev_dev"));
      fe.aggregates.cross = quadrant(q.at("cross"));
      out.push_back(std::move(fe));
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("aggregates: ") + e.what());
  }
}

/// Writes id_table.{csv,json} and aggregates.{csv,json} into out_dir. CSV
/// cells use one decimal; JSON keeps full precision.
inline void emit_tables(const IdResult& id, const std::vector<FrontEndAggregates>& aggregates,
                        const std::filesystem::path& out_dir) {
  detail::write_text(out_dir / "id_table.csv", id_table_csv(id));
  detail::write_text(out_dir / "id_table.json", id_table_json(id).dump(2) + "\n");
  detail::write_text(out_dir / "aggregates.csv", aggregates_csv(aggregates));
  detail::write_text(out_dir / "aggregates.json", aggregates_json(aggregates).dump(2) + "\n");
}

}  // namespace spoofprint
