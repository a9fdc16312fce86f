#include "parex/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "parex/json_codec.hpp"

namespace parex {

namespace {

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (const char c : field) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += "\"";
  return out;
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::store_io, "cannot write " + path.string());
  return out;
}

std::vector<Trial> completed_sorted(const std::vector<Trial>& trials) {
  std::vector<Trial> out;
  for (const auto& t : trials) {
    if (t.state == TrialState::Complete) out.push_back(t);
  }
  std::sort(out.begin(), out.end(), [](const Trial& a, const Trial& b) { return a.id < b.id; });
  return out;
}

const char* agent_color(int agent) {
  static const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  return palette[static_cast<std::size_t>(agent) % 10];
}

struct Frame {
  double x0 = 60, y0 = 20, width = 640, height = 400;
  double min_x = 0, max_x = 1, min_y = 0, max_y = 1;

  double sx(double x) const {
    const double span = max_x > min_x ? max_x - min_x : 1.0;
    return x0 + (x - min_x) / span * width;
  }
  double sy(double y) const {
    const double span = max_y > min_y ? max_y - min_y : 1.0;
    return y0 + height - (y - min_y) / span * height;
  }
};

void svg_header(std::ostringstream& svg, const Frame& f, const std::string& title,
                const std::string& x_label, const std::string& y_label) {
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << f.x0 + f.width + 40
      << "\" height=\"" << f.y0 + f.height + 60 << "\">\n";
  svg << "<rect x=\"" << f.x0 << "\" y=\"" << f.y0 << "\" width=\"" << f.width
      << "\" height=\"" << f.height << "\" fill=\"white\" stroke=\"#444\"/>\n";
  svg << "<text x=\"" << f.x0 << "\" y=\"14\" font-size=\"13\">" << title << "</text>\n";
  svg << "<text x=\"" << f.x0 + f.width / 2 << "\" y=\"" << f.y0 + f.height + 40
      << "\" font-size=\"11\" text-anchor=\"middle\">" << x_label << "</text>\n";
  svg << "<text x=\"14\" y=\"" << f.y0 + f.height / 2
      << "\" font-size=\"11\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
      << f.y0 + f.height / 2 << ")\">" << y_label << "</text>\n";
  svg << "<text x=\"" << f.x0 - 6 << "\" y=\"" << f.sy(f.min_y)
      << "\" font-size=\"10\" text-anchor=\"end\">" << format_double(f.min_y) << "</text>\n";
  svg << "<text x=\"" << f.x0 - 6 << "\" y=\"" << f.sy(f.max_y) + 10
      << "\" font-size=\"10\" text-anchor=\"end\">" << format_double(f.max_y) << "</text>\n";
}

}  // namespace

void write_trials_csv(const std::filesystem::path& path, const Study& study,
                      const std::vector<Trial>& trials) {
  auto out = open_out(path);
  out << "id,agent,state";
  for (const auto& spec : study.space.specs()) out << ',' << csv_escape(spec.name);
  for (const auto& metric : study.metric_names) out << ',' << csv_escape(metric);
  out << '\n';
  std::vector<Trial> sorted = trials;
  std::sort(sorted.begin(), sorted.end(),
            [](const Trial& a, const Trial& b) { return a.id < b.id; });
  for (const auto& t : sorted) {
    out << t.id << ',' << t.agent_id << ',' << trial_state_name(t.state);
    for (const auto& spec : study.space.specs()) {
      const auto it = t.params.find(spec.name);
      out << ',' << (it == t.params.end() ? "" : csv_escape(value_to_string(it->second)));
    }
    for (std::size_t m = 0; m < study.metric_names.size(); ++m) {
      out << ',';
      if (t.state == TrialState::Complete && m < t.values.size())
        out << format_double(t.values[m]);
    }
    out << '\n';
  }
}

void write_snapshots_csv(const std::filesystem::path& path, const Study& study,
                         const std::vector<ImportanceSnapshot>& snapshots) {
  auto out = open_out(path);
  out << "trial_count,objective";
  for (const auto& spec : study.space.specs()) out << ',' << csv_escape(spec.name);
  out << '\n';
  for (const auto& snap : snapshots) {
    for (const auto& report : snap.reports) {
      out << snap.trial_count << ',' << report.objective_index;
      for (const auto& spec : study.space.specs()) {
        double value = 0.0;
        for (const auto& [name, imp] : report.entries) {
          if (name == spec.name) {
            value = imp;
            break;
          }
        }
        out << ',' << format_double(value);
      }
      out << '\n';
    }
  }
}

void write_convergence_csv(const std::filesystem::path& path, const Study& study,
                           const std::vector<Trial>& trials) {
  auto out = open_out(path);
  out << "trial,agent,value,best_so_far\n";
  const double sign = study.directions[0] == Direction::Minimize ? 1.0 : -1.0;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& t : completed_sorted(trials)) {
    best = std::min(best, sign * t.values[0]);
    out << t.id << ',' << t.agent_id << ',' << format_double(t.values[0]) << ','
        << format_double(sign * best) << '\n';
  }
}

void write_pareto_csv(const std::filesystem::path& path, const Study& study,
                      const std::vector<Trial>& front) {
  auto out = open_out(path);
  out << "trial";
  for (const auto& metric : study.metric_names) out << ',' << csv_escape(metric);
  out << '\n';
  for (const auto& t : front) {
    out << t.id;
    for (const double v : t.values) out << ',' << format_double(v);
    out << '\n';
  }
}

std::string render_convergence_svg(const Study& study, const std::vector<Trial>& trials) {
  const auto complete = completed_sorted(trials);
  Frame f;
  if (!complete.empty()) {
    f.min_x = 0;
    f.max_x = static_cast<double>(complete.back().id);
    f.min_y = f.max_y = complete.front().values[0];
    for (const auto& t : complete) {
      f.min_y = std::min(f.min_y, t.values[0]);
      f.max_y = std::max(f.max_y, t.values[0]);
    }
  }
  std::ostringstream svg;
  svg_header(svg, f, "objective per trial, best-so-far overlaid (" + study.name + ")",
             "trial", study.metric_names.empty() ? "objective" : study.metric_names[0]);
  const double sign = study.directions[0] == Direction::Minimize ? 1.0 : -1.0;
  double best = std::numeric_limits<double>::infinity();
  std::string polyline;
  for (const auto& t : complete) {
    best = std::min(best, sign * t.values[0]);
    svg << "<circle cx=\"" << f.sx(static_cast<double>(t.id)) << "\" cy=\""
        << f.sy(t.values[0]) << "\" r=\"2.5\" fill=\"" << agent_color(t.agent_id)
        << "\" fill-opacity=\"0.7\"/>\n";
    polyline += format_double(f.sx(static_cast<double>(t.id))) + "," +
                format_double(f.sy(sign * best)) + " ";
  }
  if (!polyline.empty())
    svg << "<polyline points=\"" << polyline
        << "\" fill=\"none\" stroke=\"black\" stroke-width=\"1.5\"/>\n";
  svg << "</svg>\n";
  return svg.str();
}

std::string render_importances_svg(const Study& study,
                                   const std::vector<ImportanceSnapshot>& snapshots) {
  Frame f;
  f.min_y = 0.0;
  f.max_y = 1.0;
  if (!snapshots.empty()) {
    f.min_x = static_cast<double>(snapshots.front().trial_count);
    f.max_x = static_cast<double>(snapshots.back().trial_count);
  }
  std::ostringstream svg;
  svg_header(svg, f, "first-order importances per snapshot (" + study.name + ")",
             "completed trials", "importance");
  int color = 0;
  for (const auto& spec : study.space.specs()) {
    std::string polyline;
    for (const auto& snap : snapshots) {
      if (snap.reports.empty()) continue;
      double value = 0.0;
      for (const auto& [name, imp] : snap.reports[0].entries) {
        if (name == spec.name) {
          value = imp;
          break;
        }
      }
      polyline += format_double(f.sx(static_cast<double>(snap.trial_count))) + "," +
                  format_double(f.sy(value)) + " ";
    }
    svg << "<polyline points=\"" << polyline << "\" fill=\"none\" stroke=\""
        << agent_color(color) << "\" stroke-width=\"1.5\"/>\n";
    svg << "<text x=\"" << f.x0 + f.width + 6 << "\" y=\"" << f.y0 + 14 + 14 * color
        << "\" font-size=\"10\" fill=\"" << agent_color(color) << "\">" << spec.name
        << "</text>\n";
    ++color;
  }
  svg << "</svg>\n";
  return svg.str();
}

std::string render_pareto_svg(const Study& study, const std::vector<Trial>& front) {
  Frame f;
  if (!front.empty() && front.front().values.size() >= 2) {
    f.min_x = f.max_x = front.front().values[0];
    f.min_y = f.max_y = front.front().values[1];
    for (const auto& t : front) {
      f.min_x = std::min(f.min_x, t.values[0]);
      f.max_x = std::max(f.max_x, t.values[0]);
      f.min_y = std::min(f.min_y, t.values[1]);
      f.max_y = std::max(f.max_y, t.values[1]);
    }
  }
  std::ostringstream svg;
  svg_header(svg, f, "final non-dominated set (" + study.name + ")",
             study.metric_names.size() > 0 ? study.metric_names[0] : "objective 0",
             study.metric_names.size() > 1 ? study.metric_names[1] : "objective 1");
  for (const auto& t : front) {
    const double y = t.values.size() > 1 ? t.values[1] : t.values[0];
    svg << "<circle cx=\"" << f.sx(t.values[0]) << "\" cy=\"" << f.sy(y)
        << "\" r=\"3.5\" fill=\"#d62728\"/>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

ojson run_result_to_json(const RunResult& result) {
  ojson studies = ojson::array();
  for (const auto& s : result.studies) {
    ojson best = ojson::array();
    for (const auto& t : s.best) best.push_back(trial_to_json(t));
    ojson snaps = ojson::array();
    for (const auto& snap : s.importance_history) snaps.push_back(snapshot_to_json(snap));
    ojson per_agent = ojson::object();
    for (const auto& [agent, count] : s.per_agent_trials)
      per_agent[std::to_string(agent)] = count;
    studies.push_back(ojson{{"study", s.study_name},
                            {"trial_count", s.trial_count},
                            {"per_agent_trials", std::move(per_agent)},
                            {"best", std::move(best)},
                            {"importance_history", std::move(snaps)}});
  }
  ojson agents = ojson::array();
  for (const auto& a : result.agents) {
    agents.push_back(ojson{{"agent", a.agent_id},
                           {"study", a.study},
                           {"completed", a.completed},
                           {"failed", a.failed},
                           {"error", a.error}});
  }
  return ojson{{"studies", std::move(studies)},
               {"agents", std::move(agents)},
               {"wall_time_s", result.wall_time_s}};
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::store_io, "cannot open " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      const char c = line[i];
      if (quoted) {
        if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else if (c == '"') {
          quoted = false;
        } else {
          field += c;
        }
      } else if (c == '"') {
        quoted = true;
      } else if (c == ',') {
        row.push_back(std::move(field));
        field.clear();
      } else {
        field += c;
      }
    }
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace parex
