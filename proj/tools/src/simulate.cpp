#include "doseins_tools/simulate.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "doseins_tools/audit.hpp"

#ifndef DOSEINS_VERSION
#define DOSEINS_VERSION "unknown"
#endif

namespace doseins {

std::string project_version() { return DOSEINS_VERSION; }

std::string metrics_csv(const RunConfig& cfg, const std::vector<BatchMetrics>& metrics) {
  std::ostringstream os;
  os << "# config=" << cfg.echo().dump() << '\n';
  write_csv_header(os);
  for (const auto& m : metrics) write_csv_row(os, m);
  return os.str();
}

json metrics_json(const RunConfig& cfg, const std::vector<BatchMetrics>& metrics) {
  return json{{"config", cfg.echo()},
              {"overly_toxic_definition", "selected MTD has true DLT probability above phi3"},
              {"cells", metrics}};
}

namespace {

std::string xml_escape(const std::string& s) {
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

std::string cell_label(const BatchMetrics& m) {
  std::string label = m.scenario + " " + std::string(to_string(m.variant));
  if (is_hybrid(m.variant)) {
    char buf[32];
    std::snprintf(buf, sizeof buf, " c=%g", m.c);
    if (m.adaptive != AdaptiveMode::kNone) label += " " + std::string(to_string(m.adaptive));
    label += buf;
  }
  return label;
}

std::string fill_for(Variant v) {
  switch (v) {
    case Variant::kBoin: return "#7f7f7f";
    case Variant::kHybridIboin: return "#1f77b4";
    case Variant::kBoinEt: return "#bcbd22";
    case Variant::kHybridIboinEt: return "#d62728";
  }
  return "#000000";
}

std::string cell_file_stem(const BatchMetrics& m) {
  std::string s = m.scenario + "_" + std::string(to_string(m.variant)) + "_" + std::string(to_string(m.adaptive));
  if (is_hybrid(m.variant)) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "_c%g", m.c);
    s += buf;
  }
  return s;
}

void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << content;
  if (!out) throw std::runtime_error("write failed: " + p.string());
}

}  // namespace

std::string render_bar_chart(const std::vector<BatchMetrics>& metrics, const std::string& title) {
  constexpr int kBar = 22;
  constexpr int kGap = 6;
  constexpr int kLeft = 50;
  constexpr int kTop = 40;
  constexpr int kPlot = 300;
  constexpr int kLabels = 230;
  const int width = kLeft + static_cast<int>(metrics.size()) * (kBar + kGap) + 20;
  const int height = kTop + kPlot + kLabels;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" font-family=\"sans-serif\" font-size=\"10\">\n";
  os << "<text x=\"" << kLeft << "\" y=\"20\" font-size=\"14\">" << xml_escape(title) << "</text>\n";
  for (int tick = 0; tick <= 100; tick += 20) {
    const int y = kTop + kPlot - tick * kPlot / 100;
    os << "<line x1=\"" << kLeft << "\" y1=\"" << y << "\" x2=\"" << width - 10 << "\" y2=\"" << y
       << "\" stroke=\"#dddddd\"/>\n";
    os << "<text x=\"" << kLeft - 6 << "\" y=\"" << y + 3 << "\" text-anchor=\"end\">" << tick << "</text>\n";
  }
  int x = kLeft + kGap;
  for (const auto& m : metrics) {
    const double h = std::clamp(m.pct_correct_mtd, 0.0, 100.0) * kPlot / 100.0;
    char rect[256];
    std::snprintf(rect, sizeof rect, "<rect x=\"%d\" y=\"%.2f\" width=\"%d\" height=\"%.2f\" fill=\"%s\">", x,
                  kTop + kPlot - h, kBar, h, fill_for(m.variant).c_str());
    os << rect << "<title>" << xml_escape(cell_label(m)) << ": ";
    char val[32];
    std::snprintf(val, sizeof val, "%.1f%%", m.pct_correct_mtd);
    os << val << "</title></rect>\n";
    const int lx = x + kBar / 2;
    const int ly = kTop + kPlot + 8;
    os << "<text x=\"" << lx << "\" y=\"" << ly << "\" transform=\"rotate(60 " << lx << ' ' << ly << ")\">"
       << xml_escape(cell_label(m)) << "</text>\n";
    x += kBar + kGap;
  }
  os << "<text x=\"12\" y=\"" << kTop + kPlot / 2 << "\" transform=\"rotate(-90 12 " << kTop + kPlot / 2
     << ")\" text-anchor=\"middle\">% correct MTD</text>\n";
  os << "</svg>\n";
  return os.str();
}

SimulationOutputs run_simulation(const RunConfig& cfg, std::ostream* progress) {
  const std::filesystem::path dir = cfg.output_dir;
  std::filesystem::create_directories(dir);
  SimulationOutputs out;
  const auto cells = cfg.cells();
  for (const auto& spec : cells) {
    auto m = run_batch(spec);
    if (progress) {
      *progress << cell_label(m) << ": correct MTD " << m.pct_correct_mtd << "% (" << m.replicates - m.excluded
                << " included)\n";
    }
    if (cfg.audit > 0) {
      const auto audit_dir = dir / "audit";
      std::filesystem::create_directories(audit_dir);
      for (int r = 0; r < std::min(cfg.audit, spec.replicates); ++r) {
        const auto o = run_trial(spec, r, true);
        const auto path = audit_dir / (cell_file_stem(m) + "_rep" + std::to_string(r) + ".jsonl");
        write_jsonl(path, audit_lines(*o.trace, spec.engine));
        out.files.push_back(path);
      }
    }
    out.metrics.push_back(std::move(m));
  }
  const auto csv = dir / "metrics.csv";
  const auto js = dir / "metrics.json";
  const auto svg = dir / "correct_mtd.svg";
  const auto manifest = dir / "manifest.json";
  write_file(csv, metrics_csv(cfg, out.metrics));
  write_file(js, metrics_json(cfg, out.metrics).dump(2) + "\n");
  write_file(svg, render_bar_chart(out.metrics, "Correct MTD selection"));
  json files = json::array({"metrics.csv", "metrics.json", "correct_mtd.svg"});
  for (const auto& f : out.files) files.push_back(std::filesystem::relative(f, dir).generic_string());
  write_file(manifest, json{{"seed", cfg.seed},
                            {"version", project_version()},
                            {"config", cfg.echo()},
                            {"cells", cells.size()},
                            {"files", files}}
                               .dump(2) +
                           "\n");
  out.files.insert(out.files.begin(), {csv, js, svg, manifest});
  return out;
}

}  // namespace doseins
