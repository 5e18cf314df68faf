#include "ilts/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ilts/binary.hpp"
#include "ilts/common.hpp"

namespace ilts {

using nlohmann::json;

std::string_view eval_kind_name(EvalKind kind) {
  switch (kind) {
    case EvalKind::Uninterleaved: return "uninterleaved";
    case EvalKind::NeedleAfterFinal: return "needle_after_final";
    case EvalKind::NeedleAfterInitial: return "needle_after_initial";
    case EvalKind::Restart: return "restart";
    case EvalKind::NeedlePosition: return "needle_position";
    case EvalKind::PretrainLoss: return "pretrain_loss";
    case EvalKind::Circuit: return "circuit";
  }
  return "unknown";
}

EvalKind parse_eval_kind(std::string_view name) {
  for (auto k : {EvalKind::Uninterleaved, EvalKind::NeedleAfterFinal, EvalKind::NeedleAfterInitial,
                 EvalKind::Restart, EvalKind::NeedlePosition, EvalKind::PretrainLoss,
                 EvalKind::Circuit}) {
    if (name == eval_kind_name(k)) return k;
  }
  throw Error(Errc::InvalidArgument, "unknown eval kind '" + std::string(name) + "'");
}

double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw Error(Errc::InvalidArgument, "quantile of an empty sample");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return v[lo] + frac * (v[hi] - v[lo]);
}

Quantiles quantiles(const std::vector<double>& values) {
  return {quantile(values, 0.25), quantile(values, 0.5), quantile(values, 0.75)};
}

double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

Quantiles aggregate(const std::vector<double>& errors, int n_configs, int n_inits, Aggregation how) {
  if (errors.size() != static_cast<std::size_t>(n_configs) * static_cast<std::size_t>(n_inits)) {
    throw Error(Errc::ShapeMismatch, "error array does not match configs x inits");
  }
  if (how == Aggregation::Pooled) return quantiles(errors);
  std::vector<double> per_config;
  per_config.reserve(static_cast<std::size_t>(n_configs));
  for (int c = 0; c < n_configs; ++c) {
    const auto b = errors.begin() + static_cast<std::ptrdiff_t>(c) * n_inits;
    per_config.push_back(median(std::vector<double>(b, b + n_inits)));
  }
  return quantiles(per_config);
}

std::string to_json(const MetricsRecord& r) {
  json j = {{"checkpoint_examples_seen", r.checkpoint_examples_seen},
            {"eval_kind", eval_kind_name(r.eval_kind)},
            {"predictor", r.predictor},
            {"ood_kind", r.ood_kind},
            {"haystack_size", r.haystack_size},
            {"needle_position", r.needle_position},
            {"index_within_segment", r.index_within_segment},
            {"segment_position", r.segment_position},
            {"quantiles", {{"q25", r.quantiles.q25}, {"q50", r.quantiles.q50}, {"q75", r.quantiles.q75}}},
            {"n_samples", r.n_samples}};
  if (r.mean) j["mean"] = *r.mean;
  return j.dump();
}

MetricsRecord record_from_json(std::string_view line) {
  try {
    const json j = json::parse(line);
    MetricsRecord r;
    r.checkpoint_examples_seen = j.at("checkpoint_examples_seen");
    r.eval_kind = parse_eval_kind(j.at("eval_kind").get<std::string>());
    r.predictor = j.at("predictor");
    r.ood_kind = j.value("ood_kind", "none");
    r.haystack_size = j.at("haystack_size");
    r.needle_position = j.at("needle_position");
    r.index_within_segment = j.at("index_within_segment");
    r.segment_position = j.value("segment_position", -1);
    const auto& q = j.at("quantiles");
    r.quantiles = {q.at("q25"), q.at("q50"), q.at("q75")};
    if (j.contains("mean")) r.mean = j.at("mean").get<double>();
    r.n_samples = j.at("n_samples");
    return r;
  } catch (const json::exception& e) {
    throw Error(Errc::CorruptFile, std::string("metrics record: ") + e.what());
  }
}

std::string csv_header() {
  return "checkpoint_examples_seen,eval_kind,predictor,ood_kind,haystack_size,needle_position,"
         "index_within_segment,segment_position,q25,q50,q75,mean,n_samples";
}

std::string to_csv(const MetricsRecord& r) {
  std::ostringstream os;
  os.precision(17);
  os << r.checkpoint_examples_seen << ',' << eval_kind_name(r.eval_kind) << ',' << r.predictor << ','
     << r.ood_kind << ',' << r.haystack_size << ',' << r.needle_position << ','
     << r.index_within_segment << ',' << r.segment_position << ',' << r.quantiles.q25 << ','
     << r.quantiles.q50 << ',' << r.quantiles.q75 << ',';
  if (r.mean) os << *r.mean;
  os << ',' << r.n_samples;
  return os.str();
}

void write_ndjson(const std::vector<MetricsRecord>& records, const std::filesystem::path& path) {
  std::string text;
  for (const auto& r : records) {
    text += to_json(r);
    text += '\n';
  }
  bin::write_file_atomic(path, text);
}

void append_ndjson(const MetricsRecord& record, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::app);
  out << to_json(record) << '\n';
  if (!out) throw Error(Errc::Io, "cannot append to " + path.string());
}

std::vector<MetricsRecord> read_ndjson(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  std::vector<MetricsRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(record_from_json(line));
  }
  return out;
}

void write_csv(const std::vector<MetricsRecord>& records, const std::filesystem::path& path) {
  std::string text = csv_header() + '\n';
  for (const auto& r : records) text += to_csv(r) + '\n';
  bin::write_file_atomic(path, text);
}

}  // namespace ilts
