#pragma once

#include <cstdio>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "opseq/classify/dataset.hpp"
#include "opseq/classify/network.hpp"
#include "opseq/io.hpp"

namespace opseq {

// Rows are true families, columns predicted families.
struct ConfusionMatrix {
  std::vector<std::string> labels;
  std::vector<std::vector<std::size_t>> counts;

  static ConfusionMatrix from_predictions(std::vector<std::string> labels, std::span<const Label> truth,
                                          std::span<const Label> predicted) {
    if (truth.size() != predicted.size()) throw DataError("truth and prediction counts differ");
    ConfusionMatrix m{std::move(labels), {}};
    const std::size_t C = m.labels.size();
    m.counts.assign(C, std::vector<std::size_t>(C, 0));
    for (std::size_t i = 0; i < truth.size(); ++i)
      ++m.counts[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(predicted[i])];
    return m;
  }

  std::size_t total() const {
    std::size_t t = 0;
    for (const auto& r : counts)
      for (std::size_t v : r) t += v;
    return t;
  }

  std::size_t correct() const {
    std::size_t t = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) t += counts[i][i];
    return t;
  }

  double accuracy() const {
    const std::size_t t = total();
    return t == 0 ? 0.0 : static_cast<double>(correct()) / static_cast<double>(t);
  }

  // Fraction of family c's test samples predicted as c; 0 for an empty row.
  double class_accuracy(std::size_t c) const {
    std::size_t row = 0;
    for (std::size_t v : counts[c]) row += v;
    return row == 0 ? 0.0 : static_cast<double>(counts[c][c]) / static_cast<double>(row);
  }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

struct GridRow {
  json point;  // the values this row sets
  double accuracy = 0.0;
  bool best = false;
  bool flagged = false;
  std::size_t index = 0;  // position in the grid before sorting
};

struct SeriesPoint {
  double fraction = 0.0;
  double accuracy = 0.0;
};

struct Series {
  std::string name;
  json classifier;
  std::vector<SeriesPoint> points;
};

struct Report {
  std::string kind = "experiment";  // experiment | grid | robustness
  json config;
  double accuracy = 0.0;
  ConfusionMatrix confusion;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  std::optional<TrainingCurves> curves;
  std::vector<GridRow> grid;
  std::vector<Series> series;
  std::vector<std::string> skipped;  // samples below the minimum length
  json timing = json::object();  // wall-clock seconds, excluded from comparisons
};

inline json report_to_json(const Report& r) {
  json j{{"kind", r.kind}, {"config", r.config}};
  if (r.kind != "robustness") {
    j["accuracy"] = r.accuracy;
    j["train_size"] = r.train_size;
    j["test_size"] = r.test_size;
    json per_class = json::object();
    for (std::size_t c = 0; c < r.confusion.labels.size(); ++c)
      per_class[r.confusion.labels[c]] = r.confusion.class_accuracy(c);
    j["confusion"] = {{"labels", r.confusion.labels}, {"counts", r.confusion.counts}, {"per_class_accuracy", per_class}};
  }
  if (r.curves) {
    j["curves"] = {{"train_loss", r.curves->train_loss},
                   {"train_accuracy", r.curves->train_accuracy},
                   {"val_loss", r.curves->val_loss},
                   {"val_accuracy", r.curves->val_accuracy}};
  }
  if (!r.grid.empty()) {
    json rows = json::array();
    for (const auto& g : r.grid)
      rows.push_back({{"point", g.point}, {"accuracy", g.accuracy}, {"best", g.best}, {"flagged", g.flagged}, {"index", g.index}});
    j["grid"] = std::move(rows);
  }
  if (!r.series.empty()) {
    json all = json::array();
    for (const auto& s : r.series) {
      json pts = json::array();
      for (const auto& p : s.points) pts.push_back({{"fraction", p.fraction}, {"accuracy", p.accuracy}});
      all.push_back({{"name", s.name}, {"classifier", s.classifier}, {"points", std::move(pts)}});
    }
    j["series"] = std::move(all);
  }
  if (!r.skipped.empty()) j["skipped"] = r.skipped;
  j["timing"] = r.timing;
  return j;
}

inline Report report_from_json(const json& j) {
  try {
    Report r;
    r.kind = j.at("kind").get<std::string>();
    r.config = j.at("config");
    if (j.contains("confusion")) {
      r.accuracy = j.at("accuracy").get<double>();
      r.train_size = j.at("train_size").get<std::size_t>();
      r.test_size = j.at("test_size").get<std::size_t>();
      r.confusion.labels = j["confusion"].at("labels").get<std::vector<std::string>>();
      r.confusion.counts = j["confusion"].at("counts").get<std::vector<std::vector<std::size_t>>>();
    }
    if (j.contains("curves")) {
      const auto& c = j["curves"];
      r.curves = TrainingCurves{c.at("train_loss").get<std::vector<double>>(),
                                c.at("train_accuracy").get<std::vector<double>>(),
                                c.at("val_loss").get<std::vector<double>>(),
                                c.at("val_accuracy").get<std::vector<double>>()};
    }
    for (const auto& g : j.value("grid", json::array()))
      r.grid.push_back({g.at("point"), g.at("accuracy").get<double>(), g.at("best").get<bool>(),
                        g.at("flagged").get<bool>(), g.at("index").get<std::size_t>()});
    for (const auto& s : j.value("series", json::array())) {
      Series out{s.at("name").get<std::string>(), s.at("classifier"), {}};
      for (const auto& p : s.at("points"))
        out.points.push_back({p.at("fraction").get<double>(), p.at("accuracy").get<double>()});
      r.series.push_back(std::move(out));
    }
    r.skipped = j.value("skipped", std::vector<std::string>{});
    r.timing = j.value("timing", json::object());
    return r;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed report: ") + e.what());
  }
}

// The report without its timing fields, for reproducibility comparisons.
inline json comparable(const Report& r) {
  json j = report_to_json(r);
  j.erase("timing");
  return j;
}

// CSV: the confusion matrix (header plus one row per family) for an
// experiment, the table for a grid, one row per point for a robustness study.
inline std::string report_to_csv(const Report& r) {
  std::string out;
  if (r.kind == "grid") {
    out = "rank,index,point,accuracy,best,flagged\n";
    for (std::size_t i = 0; i < r.grid.size(); ++i) {
      const auto& g = r.grid[i];
      std::string point = g.point.dump();
      std::string quoted = "\"";
      for (char c : point) quoted += c == '"' ? std::string("\"\"") : std::string(1, c);
      quoted += '"';
      out += std::to_string(i + 1) + "," + std::to_string(g.index) + "," + quoted + "," +
             format_double(g.accuracy) + "," + (g.best ? "1" : "0") + "," + (g.flagged ? "1" : "0") + "\n";
    }
    return out;
  }
  if (r.kind == "robustness") {
    out = "series,fraction,accuracy\n";
    for (const auto& s : r.series)
      for (const auto& p : s.points) out += s.name + "," + format_double(p.fraction) + "," + format_double(p.accuracy) + "\n";
    return out;
  }
  out = "family";
  for (const auto& l : r.confusion.labels) out += "," + l;
  out += ",accuracy\n";
  for (std::size_t c = 0; c < r.confusion.labels.size(); ++c) {
    out += r.confusion.labels[c];
    for (std::size_t v : r.confusion.counts[c]) out += "," + std::to_string(v);
    out += "," + format_double(r.confusion.class_accuracy(c)) + "\n";
  }
  return out;
}

inline std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f%%", 100.0 * v);
  return buf;
}

inline std::string report_to_text(const Report& r) {
  std::string out;
  auto pad = [](std::string s, std::size_t w) {
    if (s.size() < w) s.insert(0, w - s.size(), ' ');
    return s;
  };
  if (r.kind == "robustness") {
    out += "scramble fraction vs accuracy\n";
    for (const auto& s : r.series) {
      out += s.name + ":";
      for (const auto& p : s.points) out += "  " + format_double(p.fraction) + " -> " + percent(p.accuracy);
      out += "\n";
    }
    return out;
  }
  if (r.kind == "grid") {
    out += "rank  accuracy  point\n";
    for (std::size_t i = 0; i < r.grid.size(); ++i) {
      const auto& g = r.grid[i];
      out += pad(std::to_string(i + 1), 4) + "  " + pad(percent(g.accuracy), 8) + "  " + g.point.dump();
      if (g.best) out += "  [best]";
      if (g.flagged) out += "  [flagged]";
      out += "\n";
    }
    return out;
  }
  std::size_t w = 6;
  for (const auto& l : r.confusion.labels) w = std::max(w, l.size());
  out += pad("", w);
  for (const auto& l : r.confusion.labels) out += "  " + pad(l, w);
  out += "  " + pad("acc", 7) + "\n";
  for (std::size_t c = 0; c < r.confusion.labels.size(); ++c) {
    out += pad(r.confusion.labels[c], w);
    for (std::size_t v : r.confusion.counts[c]) out += "  " + pad(std::to_string(v), w);
    out += "  " + pad(percent(r.confusion.class_accuracy(c)), 7) + "\n";
  }
  out += "overall accuracy " + percent(r.accuracy) + " (" + std::to_string(r.confusion.correct()) + "/" +
         std::to_string(r.confusion.total()) + ")\n";
  return out;
}

enum class ReportFormat { json, csv, text };

inline ReportFormat parse_report_format(std::string_view s) {
  if (s == "json") return ReportFormat::json;
  if (s == "csv") return ReportFormat::csv;
  if (s == "text") return ReportFormat::text;
  throw ConfigError("unknown report format '" + std::string(s) + "' (expected json, csv or text)");
}

inline std::string render_report(const Report& r, ReportFormat f) {
  switch (f) {
    case ReportFormat::json: return report_to_json(r).dump(2) + "\n";
    case ReportFormat::csv: return report_to_csv(r);
    case ReportFormat::text: return report_to_text(r);
  }
  return {};
}

inline void emit_report(const Report& r, ReportFormat f, const fs::path& path) {
  try {
    write_text_file(path, render_report(r, f));
  } catch (const Error& e) {
    rethrow_with_context(e, "report");
  }
}

}  // namespace opseq
