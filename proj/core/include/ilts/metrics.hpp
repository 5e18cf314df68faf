#pragma once

// Metric records, quantile aggregation and their newline-delimited JSON / CSV
// serialization (field names are stable; see docs/formats.md).

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ilts {

enum class EvalKind : std::uint8_t {
  Uninterleaved,
  NeedleAfterFinal,
  NeedleAfterInitial,
  Restart,
  NeedlePosition,
  PretrainLoss,
  Circuit,
};

std::string_view eval_kind_name(EvalKind kind);
EvalKind parse_eval_kind(std::string_view name);

struct Quantiles {
  double q25 = 0.0;
  double q50 = 0.0;
  double q75 = 0.0;

  friend bool operator==(const Quantiles&, const Quantiles&) = default;
};

struct MetricsRecord {
  std::uint64_t checkpoint_examples_seen = 0;
  EvalKind eval_kind = EvalKind::Uninterleaved;
  std::string predictor;
  std::string ood_kind = "none";
  int haystack_size = 0;
  int needle_position = 0;
  int index_within_segment = 0;
  int segment_position = -1;  // restart records only
  Quantiles quantiles;
  std::optional<double> mean;
  std::size_t n_samples = 0;

  friend bool operator==(const MetricsRecord&, const MetricsRecord&) = default;
};

// Linear interpolation between order statistics (position q * (n - 1)).
double quantile(std::vector<double> values, double q);
Quantiles quantiles(const std::vector<double>& values);
double median(std::vector<double> values);

enum class Aggregation : std::uint8_t {
  MedianThenQuantile,  // median over inits within a config, quantiles across configs
  Pooled,              // quantiles over every sample
};

// `errors` is laid out [config][init].
Quantiles aggregate(const std::vector<double>& errors, int n_configs, int n_inits, Aggregation how);

std::string to_json(const MetricsRecord& record);
MetricsRecord record_from_json(std::string_view line);
std::string csv_header();
std::string to_csv(const MetricsRecord& record);

void write_ndjson(const std::vector<MetricsRecord>& records, const std::filesystem::path& path);
// Appends without rewriting; used for streaming training logs.
void append_ndjson(const MetricsRecord& record, const std::filesystem::path& path);
std::vector<MetricsRecord> read_ndjson(const std::filesystem::path& path);
void write_csv(const std::vector<MetricsRecord>& records, const std::filesystem::path& path);

}  // namespace ilts
