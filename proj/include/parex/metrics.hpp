#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "parex/errors.hpp"

namespace parex {

// One scraped series (cpu, memory or io) at a fixed step, plus aggregates
// that are exactly recomputable from the samples.
struct MetricsSeries {
  std::string metric;
  std::vector<std::pair<std::int64_t, double>> samples;  // (unix seconds, value)

  struct Aggregates {
    double min = 0.0;
    double max = 0.0;
    double mean = 0.0;
    double std = 0.0;  // population standard deviation
    bool operator==(const Aggregates&) const = default;
  } agg;

  bool operator==(const MetricsSeries&) const = default;
};

MetricsSeries::Aggregates compute_aggregates(
    const std::vector<std::pair<std::int64_t, double>>& samples);

// Number of samples a (window, step) range query covers.
std::int64_t expected_sample_count(std::int64_t window_s, std::int64_t step_s);

inline constexpr std::int64_t kDefaultMonitorWindowS = 24 * 3600;
inline constexpr std::int64_t kDefaultMonitorStepS = 10;

// The range-query expressions sent for each metric; {selector} is replaced
// with the pod selector.  These target the standard container metrics; real
// clusters can override them at deploy time.
std::string metric_query(const std::string& metric, const std::string& pod_selector);

// Issues one GET per metric against the monitoring server's range-query
// endpoint (query/start/end/step parameters, matrix response envelope) and
// returns the cpu, memory and io series.  A dead endpoint raises
// MonitorUnreachable; a bad envelope raises MalformedResponse.
std::vector<MetricsSeries> scrape_metrics(const std::string& monitor_url,
                                          std::int64_t end_ts, std::int64_t window_s,
                                          std::int64_t step_s,
                                          const std::string& pod_selector);

// CSV layout: header "metric,timestamp,value", one row per sample, then a
// trailing aggregates block of "#agg,<metric>,<min>,<max>,<mean>,<std>".
void write_metrics_csv(const std::vector<MetricsSeries>& series,
                       const std::filesystem::path& path);
std::vector<MetricsSeries> read_metrics_csv(const std::filesystem::path& path);

}  // namespace parex
