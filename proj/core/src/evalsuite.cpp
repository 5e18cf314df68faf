#include "ilts/evalsuite.hpp"

#include <algorithm>
#include <exception>
#include <string>
#include <thread>

namespace ilts {

InterleavedTrace uninterleaved_trace(const TraceLibrary& library, std::size_t sequence, Rng& rng,
                                     int context_len) {
  const auto n_obs = static_cast<std::size_t>(context_len - 2);
  if (library.length < n_obs) {
    throw Error(Errc::LibraryExhausted, "sequences too short for an uninterleaved trace");
  }
  std::uniform_int_distribution<int> pick(0, kLabelPairs - 1);
  const auto pair = static_cast<std::int8_t>(pick(rng));
  std::vector<Provenance> prov(static_cast<std::size_t>(context_len));
  std::vector<StateVec> payload(static_cast<std::size_t>(context_len), StateVec::Zero());
  prov[0] = {TokenKind::Start, -1, -1, -1, -1};
  prov[1] = {TokenKind::Open, pair, 0, -1, -1};
  for (std::size_t i = 0; i < n_obs; ++i) {
    prov[i + 2] = {TokenKind::Obs, -1, 0, static_cast<std::int32_t>(sequence), static_cast<std::int32_t>(i)};
    payload[i + 2] = library.state(sequence, i);
  }
  InterleavedTrace tr = make_trace(prov, payload);
  tr.sampled_systems = 1;
  tr.slot_sequences = {static_cast<std::int32_t>(sequence)};
  tr.slot_pairs = {pair};
  return tr;
}

std::vector<InterleavedTrace> uninterleaved_traces(const TraceLibrary& library, std::size_t count,
                                                   std::uint64_t seed, int context_len) {
  if (count > library.num_sequences()) {
    throw Error(Errc::InsufficientSystems, "library has fewer sequences than requested");
  }
  std::vector<InterleavedTrace> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng = make_rng(seed, i);
    out.push_back(uninterleaved_trace(library, i, rng, context_len));
  }
  return out;
}

std::vector<std::vector<double>> squared_errors(const Predictor& pred,
                                                std::span<const InterleavedTrace> traces,
                                                std::span<const std::vector<int>> rows, int threads) {
  if (traces.size() != rows.size()) throw Error(Errc::ShapeMismatch, "one row list per trace");
  std::vector<std::vector<double>> out(traces.size());
  auto work = [&](std::size_t first, std::size_t count) {
    const auto predictions = pred.predict(traces.subspan(first, count), rows.subspan(first, count));
    for (std::size_t i = first; i < first + count; ++i) {
      const auto& p = predictions[i - first];
      out[i].reserve(rows[i].size());
      for (std::size_t j = 0; j < rows[i].size(); ++j) {
        const int r = rows[i][j];
        if (!traces[i].loss_mask[static_cast<std::size_t>(r)]) {
          throw Error(Errc::InvalidArgument, "row " + std::to_string(r) + " does not precede an observation");
        }
        out[i].push_back((p.row(static_cast<Eigen::Index>(j)) - traces[i].targets.row(r)).squaredNorm());
      }
    }
  };
  const std::size_t parts = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(1, threads)), 1, traces.size());
  if (parts <= 1) {
    work(0, traces.size());
    return out;
  }
  std::vector<std::exception_ptr> errors(parts);
  {
    std::vector<std::jthread> pool;
    const std::size_t per = (traces.size() + parts - 1) / parts;
    for (std::size_t k = 0; k < parts; ++k) {
      const std::size_t first = k * per;
      if (first >= traces.size()) break;
      const std::size_t count = std::min(per, traces.size() - first);
      pool.emplace_back([&, k, first, count] {
        try {
          work(first, count);
        } catch (...) {
          errors[k] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

std::vector<MetricsRecord> eval_uninterleaved(const Predictor& pred, const TraceLibrary& test_library,
                                              std::size_t n_sequences, std::uint64_t seed,
                                              const EvalOptions& opts, bool with_baseline) {
  const int context = kContextLen;
  const int n_idx = context - 2;
  std::vector<int> idx(static_cast<std::size_t>(n_idx));
  for (int k = 1; k <= n_idx; ++k) idx[static_cast<std::size_t>(k - 1)] = k;

  PinvPredictor pinv;
  std::vector<const Predictor*> preds = {&pred};
  if (with_baseline) preds.push_back(&pinv);
  // errs[p][k-1][sequence]
  std::vector<std::vector<std::vector<double>>> errs(
      preds.size(), std::vector<std::vector<double>>(static_cast<std::size_t>(n_idx)));

  if (n_sequences > test_library.num_sequences()) {
    throw Error(Errc::InsufficientSystems, "library has fewer sequences than requested");
  }
  const auto chunk = static_cast<std::size_t>(std::max(1, opts.chunk));
  for (std::size_t first = 0; first < n_sequences; first += chunk) {
    const std::size_t count = std::min(chunk, n_sequences - first);
    std::vector<InterleavedTrace> traces;
    traces.reserve(count);
    for (std::size_t i = first; i < first + count; ++i) {
      Rng rng = make_rng(seed, i);
      traces.push_back(uninterleaved_trace(test_library, i, rng, context));
    }
    const std::vector<std::vector<int>> rows(count, idx);
    for (std::size_t p = 0; p < preds.size(); ++p) {
      const auto e = squared_errors(*preds[p], traces, rows, opts.threads);
      for (std::size_t i = 0; i < count; ++i) {
        for (int k = 0; k < n_idx; ++k) {
          errs[p][static_cast<std::size_t>(k)].push_back(e[i][static_cast<std::size_t>(k)]);
        }
      }
    }
  }

  std::vector<MetricsRecord> out;
  for (std::size_t p = 0; p < preds.size(); ++p) {
    for (int k = 1; k <= n_idx; ++k) {
      MetricsRecord r;
      r.checkpoint_examples_seen = opts.examples_seen;
      r.eval_kind = EvalKind::Uninterleaved;
      r.predictor = preds[p]->name();
      r.haystack_size = 1;
      r.index_within_segment = k;
      r.quantiles = quantiles(errs[p][static_cast<std::size_t>(k - 1)]);
      r.n_samples = n_sequences;
      out.push_back(std::move(r));
    }
  }
  return out;
}

namespace {

struct Site {
  EvalKind kind;
  int segment;  // -1 unless restart
  int index;
  int row;
};

// Evaluates `pred` at fixed rows on every trace of the dataset and aggregates
// each site's [config][init] error array.
std::vector<MetricsRecord> eval_sites(const Predictor& pred, const NeedleDataset& ds,
                                      const std::vector<Site>& sites, const EvalOptions& opts) {
  std::vector<int> rows;
  rows.reserve(sites.size());
  for (const auto& s : sites) rows.push_back(s.row);
  const std::size_t nt = ds.n_traces();
  std::vector<std::vector<double>> errs(sites.size(), std::vector<double>(nt));
  const auto chunk = static_cast<std::size_t>(std::max(1, opts.chunk));
  for (std::size_t first = 0; first < nt; first += chunk) {
    const std::size_t count = std::min(chunk, nt - first);
    std::vector<InterleavedTrace> traces;
    traces.reserve(count);
    for (std::size_t t = first; t < first + count; ++t) traces.push_back(ds.trace(t));
    const std::vector<std::vector<int>> row_lists(count, rows);
    const auto e = squared_errors(pred, traces, row_lists, opts.threads);
    for (std::size_t i = 0; i < count; ++i) {
      for (std::size_t s = 0; s < sites.size(); ++s) errs[s][first + i] = e[i][s];
    }
  }
  std::vector<MetricsRecord> out;
  out.reserve(sites.size());
  for (std::size_t s = 0; s < sites.size(); ++s) {
    MetricsRecord r;
    r.checkpoint_examples_seen = opts.examples_seen;
    r.eval_kind = sites[s].kind;
    r.predictor = pred.name();
    r.ood_kind = std::string(ood_name(ds.kind));
    r.haystack_size = ds.n_systems();
    r.needle_position = ds.cfg.needle_position;
    r.index_within_segment = sites[s].index;
    r.segment_position = sites[s].segment;
    r.quantiles = aggregate(errs[s], ds.cfg.n_configs, ds.cfg.n_inits, opts.aggregation);
    r.n_samples = opts.aggregation == Aggregation::Pooled ? nt : static_cast<std::size_t>(ds.cfg.n_configs);
    out.push_back(std::move(r));
  }
  return out;
}

void require_index(const NeedleDataset& ds, int k) {
  if (k > ds.seg_len()) {
    throw Error(Errc::InvalidArgument, "index " + std::to_string(k) + " exceeds segment length");
  }
}

}  // namespace

std::vector<MetricsRecord> eval_needle(const Predictor& pred, const NeedleDataset& ds,
                                       const EvalOptions& opts) {
  std::vector<Site> sites;
  for (int k : kNeedleIndices) {
    require_index(ds, k);
    sites.push_back({EvalKind::NeedleAfterFinal, -1, k, ds.after_final_row(k)});
  }
  for (int k : kNeedleIndices) {
    sites.push_back({EvalKind::NeedleAfterInitial, -1, k, ds.after_open_row(ds.needle_segment(), k)});
  }
  return eval_sites(pred, ds, sites, opts);
}

std::vector<MetricsRecord> eval_restart(const Predictor& pred, const NeedleDataset& ds,
                                        const EvalOptions& opts) {
  if (ds.n_systems() < 3) throw Error(Errc::InvalidArgument, "restart evaluation needs N >= 3");
  require_index(ds, 8);
  std::vector<Site> sites;
  for (int j = 0; j < ds.n_systems(); ++j) {
    for (int s = 1; s <= 8; ++s) sites.push_back({EvalKind::Restart, j, s, ds.after_open_row(j, s)});
  }
  return eval_sites(pred, ds, sites, opts);
}

std::vector<MetricsRecord> eval_needle_position_sweep(const Predictor& pred,
                                                      const TraceLibrary& test_library,
                                                      const NeedleConfig& base,
                                                      const EvalOptions& opts) {
  std::vector<int> positions;
  for (int p = 0; p < base.n_systems; ++p) positions.push_back(p);
  positions.push_back(kUncutControl);
  std::vector<MetricsRecord> out;
  for (int p : positions) {
    NeedleConfig cfg = base;
    cfg.needle_position = p;
    const NeedleDataset ds = build_needle_dataset(test_library, cfg);
    std::vector<Site> sites;
    for (int k : kNeedleIndices) {
      require_index(ds, k);
      sites.push_back({EvalKind::NeedlePosition, -1, k, ds.after_final_row(k)});
    }
    auto recs = eval_sites(pred, ds, sites, opts);
    out.insert(out.end(), recs.begin(), recs.end());
  }
  return out;
}

PretrainLoss pretrain_loss(const Predictor& pred, const TraceLibrary& held_out, std::size_t n_traces,
                           std::uint64_t seed, const EvalOptions& opts, const GenConfig& cfg) {
  PinvPredictor pinv;
  PretrainLoss out;
  double sum = 0.0;
  double sum_base = 0.0;
  const auto chunk = static_cast<std::size_t>(std::max(1, opts.chunk));
  for (std::size_t first = 0; first < n_traces; first += chunk) {
    const std::size_t count = std::min(chunk, n_traces - first);
    const auto traces = interleave_batch(held_out, seed, first, count, cfg);
    std::vector<std::vector<int>> rows(count);
    for (std::size_t i = 0; i < count; ++i) {
      for (int r = 0; r < traces[i].length(); ++r) {
        if (traces[i].loss_mask[static_cast<std::size_t>(r)]) rows[i].push_back(r);
      }
    }
    const auto e = squared_errors(pred, traces, rows, opts.threads);
    const auto b = squared_errors(pinv, traces, rows, opts.threads);
    for (std::size_t i = 0; i < count; ++i) {
      for (std::size_t j = 0; j < rows[i].size(); ++j) {
        sum += e[i][j];
        sum_base += b[i][j];
      }
      out.n_positions += rows[i].size();
    }
  }
  if (out.n_positions == 0) throw Error(Errc::EmptyMask, "no masked position in the held-out traces");
  out.value = sum / static_cast<double>(out.n_positions);
  out.baseline = sum_base / static_cast<double>(out.n_positions);
  return out;
}

}  // namespace ilts
