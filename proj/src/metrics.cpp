#include "parex/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <httplib.h>
#include <json.hpp>

#include "parex/json_codec.hpp"

namespace parex {

MetricsSeries::Aggregates compute_aggregates(
    const std::vector<std::pair<std::int64_t, double>>& samples) {
  MetricsSeries::Aggregates agg;
  if (samples.empty()) return agg;
  agg.min = samples.front().second;
  agg.max = samples.front().second;
  double sum = 0.0;
  for (const auto& [ts, v] : samples) {
    agg.min = std::min(agg.min, v);
    agg.max = std::max(agg.max, v);
    sum += v;
  }
  const auto n = static_cast<double>(samples.size());
  agg.mean = sum / n;
  double sq = 0.0;
  for (const auto& [ts, v] : samples) sq += (v - agg.mean) * (v - agg.mean);
  agg.std = std::sqrt(sq / n);
  return agg;
}

std::int64_t expected_sample_count(std::int64_t window_s, std::int64_t step_s) {
  return window_s / step_s;
}

std::string metric_query(const std::string& metric, const std::string& pod_selector) {
  if (metric == "cpu")
    return "rate(container_cpu_usage_seconds_total{pod=~\"" + pod_selector + "\"}[1m])";
  if (metric == "memory")
    return "container_memory_working_set_bytes{pod=~\"" + pod_selector + "\"}";
  if (metric == "io")
    return "rate(container_fs_writes_bytes_total{pod=~\"" + pod_selector + "\"}[1m])";
  throw Error(Errc::malformed_response, "unknown metric '" + metric + "'");
}

namespace {

MetricsSeries parse_range_response(const std::string& metric, const std::string& body,
                                   std::int64_t step_s) {
  ojson doc = ojson::parse(body, nullptr, false);
  if (doc.is_discarded())
    throw Error(Errc::malformed_response, "monitor returned invalid JSON");
  if (doc.value("status", "") != "success")
    throw Error(Errc::malformed_response, "monitor query status was not success");
  const auto& data = doc.at("data");
  if (data.value("resultType", "") != "matrix")
    throw Error(Errc::malformed_response, "monitor result type is not matrix");
  const auto& result = data.at("result");
  MetricsSeries series;
  series.metric = metric;
  if (result.empty()) {
    throw Error(Errc::malformed_response, "monitor returned no series for " + metric);
  }
  for (const auto& pair : result.at(0).at("values")) {
    const auto ts = pair.at(0).get<std::int64_t>();
    double value = 0.0;
    if (pair.at(1).is_string()) {
      value = std::stod(pair.at(1).get<std::string>());
    } else {
      value = pair.at(1).get<double>();
    }
    series.samples.emplace_back(ts, value);
  }
  for (std::size_t i = 1; i < series.samples.size(); ++i) {
    if (series.samples[i].first - series.samples[i - 1].first != step_s)
      throw Error(Errc::malformed_response,
                  "monitor samples for " + metric + " are not on a fixed step");
  }
  series.agg = compute_aggregates(series.samples);
  return series;
}

}  // namespace

std::vector<MetricsSeries> scrape_metrics(const std::string& monitor_url,
                                          std::int64_t end_ts, std::int64_t window_s,
                                          std::int64_t step_s,
                                          const std::string& pod_selector) {
  httplib::Client client(monitor_url);
  client.set_connection_timeout(5, 0);
  client.set_read_timeout(30, 0);

  const std::int64_t start_ts = end_ts - window_s;
  std::vector<MetricsSeries> out;
  for (const std::string metric : {"cpu", "memory", "io"}) {
    httplib::Params params{{"query", metric_query(metric, pod_selector)},
                           {"start", std::to_string(start_ts)},
                           {"end", std::to_string(end_ts)},
                           {"step", std::to_string(step_s)}};
    const auto res = client.Get("/api/v1/query_range", params, httplib::Headers{});
    if (!res)
      throw Error(Errc::monitor_unreachable, "monitor at " + monitor_url + " is unreachable");
    if (res->status != 200)
      throw Error(Errc::malformed_response,
                  "monitor returned HTTP " + std::to_string(res->status));
    out.push_back(parse_range_response(metric, res->body, step_s));
  }
  return out;
}

void write_metrics_csv(const std::vector<MetricsSeries>& series,
                       const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << "metric,timestamp,value\n";
  for (const auto& s : series) {
    for (const auto& [ts, v] : s.samples)
      out << s.metric << ',' << ts << ',' << format_double(v) << '\n';
  }
  for (const auto& s : series) {
    out << "#agg," << s.metric << ',' << format_double(s.agg.min) << ','
        << format_double(s.agg.max) << ',' << format_double(s.agg.mean) << ','
        << format_double(s.agg.std) << '\n';
  }
  if (!out) throw Error(Errc::store_io, "failed to write metrics CSV");
}

std::vector<MetricsSeries> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::store_io, "cannot open metrics CSV " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "metric,timestamp,value")
    throw Error(Errc::malformed_response, "metrics CSV header mismatch");

  std::vector<MetricsSeries> series;
  const auto find_series = [&](const std::string& metric) -> MetricsSeries& {
    for (auto& s : series) {
      if (s.metric == metric) return s;
    }
    series.push_back(MetricsSeries{metric, {}, {}});
    return series.back();
  };

  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string first;
    std::getline(row, first, ',');
    if (first == "#agg") {
      std::string metric, field;
      std::getline(row, metric, ',');
      auto& s = find_series(metric);
      std::getline(row, field, ',');
      s.agg.min = std::stod(field);
      std::getline(row, field, ',');
      s.agg.max = std::stod(field);
      std::getline(row, field, ',');
      s.agg.mean = std::stod(field);
      std::getline(row, field, ',');
      s.agg.std = std::stod(field);
    } else {
      std::string ts, value;
      std::getline(row, ts, ',');
      std::getline(row, value, ',');
      find_series(first).samples.emplace_back(std::stoll(ts), std::stod(value));
    }
  }
  return series;
}

}  // namespace parex
