#include "cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ilts/binary.hpp"
#include "ilts/checkpoint.hpp"
#include "ilts/circuits.hpp"
#include "ilts/evalsuite.hpp"
#include "ilts/oodlab.hpp"
#include "manifest.hpp"

namespace ilts::cli {

namespace fs = std::filesystem;

namespace {

struct Mismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  int threads = 0;  // 0: ILTS_THREADS or 1
  std::vector<std::string> argv;
  const CLI::App* app = nullptr;

  int thread_count() const {
    if (threads > 0) return threads;
    if (const char* env = std::getenv("ILTS_THREADS")) {
      const int n = std::atoi(env);
      if (n > 0) return n;
    }
    return 1;
  }
  RunManifest manifest(const std::string& command) const {
    std::string config;
    if (app) {
      config = "threads=" + std::to_string(threads) + "\n";
      for (const auto* sub : app->get_subcommands()) config += sub->config_to_str(true, false);
    }
    return RunManifest(command, argv, config);
  }
};

fs::path manifest_path(const fs::path& out) { return fs::path(out.string() + ".manifest.json"); }

// ---------------------------------------------------------------- gen-library

struct GenLibraryArgs {
  std::string family = "orthogonal";
  std::size_t systems = 40000;
  std::size_t inits = 1;
  std::size_t length = kContextLen;
  std::uint64_t seed = 0;
  std::string role = "auto";
  fs::path out;
};

int cmd_gen_library(const GenLibraryArgs& a, const Common& c, std::ostream& out) {
  auto m = c.manifest("gen-library");
  const Family family = parse_family(a.family);
  TraceLibrary lib;
  if (a.role == "auto") {
    lib = build_library(a.systems, a.inits, a.length, family, a.seed);
  } else {
    const LibraryRole role = a.role == "train" ? LibraryRole::Train : LibraryRole::Test;
    lib = build_library(a.systems, a.inits, a.length, family, a.seed, role);
  }
  write_library(lib, a.out);
  double sq = 0.0;
  for (std::size_t s = 0; s < lib.num_sequences(); ++s) sq += lib.state(s, 0).squaredNorm();
  out << "library " << a.out.string() << ": " << lib.num_sequences() << " sequences ("
      << lib.n_systems << " systems x " << lib.n_inits << " inits), length " << lib.length
      << ", family " << family_name(family) << ", mean |x0|^2 "
      << sq / static_cast<double>(lib.num_sequences()) << '\n';
  m.seed("library", a.seed);
  m.output(a.out);
  m.write(manifest_path(a.out));
  return kExitOk;
}

// ----------------------------------------------------------------- gen-traces

struct GenTracesArgs {
  fs::path library;
  std::size_t count = 1000;
  std::uint64_t seed = 0;
  std::uint64_t first = 0;
  fs::path out;
};

int cmd_gen_traces(const GenTracesArgs& a, const Common& c, std::ostream& out) {
  auto m = c.manifest("gen-traces");
  const TraceLibrary lib = read_library(a.library);
  const auto traces = interleave_batch(lib, a.seed, a.first, a.count);
  write_traces(traces, a.seed, a.out);
  double n_sys = 0.0;
  for (const auto& t : traces) n_sys += t.sampled_systems;
  out << "wrote " << traces.size() << " traces to " << a.out.string() << ", mean N "
      << n_sys / static_cast<double>(std::max<std::size_t>(1, traces.size())) << '\n';
  m.seed("traces", a.seed);
  m.input(a.library);
  m.output(a.out);
  m.write(manifest_path(a.out));
  return kExitOk;
}

// ---------------------------------------------------------------------- train

struct TrainArgs {
  fs::path library;
  std::string preset = "medium";
  int batch = kBaseBatch;
  std::optional<double> lr;
  double weight_decay = 1e-2;
  std::uint64_t steps = 1000;
  std::uint64_t seed = 0;
  std::uint64_t data_seed = 1;
  int micro_batch = 16;
  std::uint64_t schedule_start = 1ull << 16;
  std::uint64_t save_every = 200;
  bool resume = false;
  fs::path out_dir;
};

std::vector<std::uint64_t> geometric_schedule(std::uint64_t start, std::uint64_t until) {
  std::vector<std::uint64_t> s;
  for (std::uint64_t e = start; e <= until && e != 0; e *= 2) s.push_back(e);
  return s;
}

int cmd_train(const TrainArgs& a, const Common& c, std::ostream& out) {
  auto m = c.manifest("train");
  fs::create_directories(a.out_dir);
  const fs::path latest = a.out_dir / "latest.ilc";
  const fs::path log = a.out_dir / "train_log.ndjson";
  const TraceLibrary lib = read_library(a.library);
  m.input(a.library);

  ModelState state;
  if (a.resume && fs::exists(latest)) {
    state = load_checkpoint(latest);
    if (state.family != lib.family) throw Mismatch("checkpoint was trained on a different family");
    // Extend the schedule to the new step budget.
    const auto& old = state.train.checkpoint_schedule;
    state.train.checkpoint_schedule = geometric_schedule(
        old.empty() ? a.schedule_start : old.front(), a.steps * static_cast<std::uint64_t>(state.train.batch_size));
    out << "resuming at step " << state.step << " (examples_seen " << state.examples_seen << ")\n";
  } else {
    const ModelConfig mc = ModelConfig::preset(parse_preset(a.preset));
    TrainConfig base;
    base.weight_decay = a.weight_decay;
    base.micro_batch = a.micro_batch;
    base.seed = a.seed;
    TrainConfig tc = scale_hyperparams(base, mc, a.batch);
    if (a.lr) tc.learning_rate = *a.lr;
    tc.checkpoint_schedule = geometric_schedule(a.schedule_start, a.steps * static_cast<std::uint64_t>(a.batch));
    state.model = Transformer<float>(mc, a.seed);
    state.train = tc;
    state.data_seed = a.data_seed;
    state.family = lib.family;
    std::error_code ec;
    fs::remove(log, ec);
  }
  out << "model " << preset_name(state.model.config().size) << " (" << state.model.parameter_count()
      << " parameters), batch " << state.train.batch_size << ", lr " << state.train.learning_rate
      << ", weight decay " << state.train.weight_decay << '\n';

  const std::uint64_t remaining = a.steps > state.step ? a.steps - state.step : 0;
  std::size_t next_ckpt = 0;
  const auto& sched = state.train.checkpoint_schedule;
  while (next_ckpt < sched.size() && sched[next_ckpt] <= state.examples_seen) ++next_ckpt;

  train_steps(state, lib, remaining, [&](const TrainProgress& p) {
    std::ofstream lf(log, std::ios::app);
    lf << "{\"step\":" << p.step << ",\"examples_seen\":" << p.examples_seen << ",\"loss\":" << p.loss << "}\n";
    while (next_ckpt < sched.size() && sched[next_ckpt] <= p.examples_seen) {
      const fs::path ck = a.out_dir / ("ckpt-" + std::to_string(sched[next_ckpt]) + ".ilc");
      save_checkpoint(state, ck);
      out << "checkpoint " << ck.string() << '\n';
      ++next_ckpt;
    }
    if (a.save_every > 0 && p.step % a.save_every == 0) save_checkpoint(state, latest);
  });
  save_checkpoint(state, latest);
  out << "finished at step " << state.step << " (examples_seen " << state.examples_seen << ")\n";

  m.seed("init", state.train.seed);
  m.seed("data", state.data_seed);
  for (const auto& entry : fs::directory_iterator(a.out_dir)) {
    const auto ext = entry.path().extension();
    if (ext == ".ilc" || entry.path() == log) m.output(entry.path());
  }
  m.write(a.out_dir / "manifest.json");
  return kExitOk;
}

// ------------------------------------------------------------ shared eval bits

struct PredictorArgs {
  fs::path checkpoint;
  std::string predictor = "model";
  bool allow_family_mismatch = false;
};

struct LoadedPredictor {
  std::optional<ModelState> state;
  std::unique_ptr<Predictor> pred;
  std::uint64_t examples_seen = 0;
};

LoadedPredictor load_predictor(const PredictorArgs& a, const TraceLibrary& lib, int needed_context,
                               RunManifest& m) {
  LoadedPredictor lp;
  if (a.predictor == "model") {
    if (a.checkpoint.empty()) throw Error(Errc::InvalidArgument, "--checkpoint is required for the model predictor");
    lp.state = load_checkpoint(a.checkpoint);
    m.input(a.checkpoint);
    if (lp.state->model.config().context_len < needed_context) {
      throw Mismatch("checkpoint context length " + std::to_string(lp.state->model.config().context_len) +
                     " is shorter than the evaluation traces (" + std::to_string(needed_context) + ")");
    }
    if (lp.state->family != lib.family && !a.allow_family_mismatch) {
      throw Mismatch("checkpoint was trained on family " + std::string(family_name(lp.state->family)) +
                     " but the library is " + std::string(family_name(lib.family)));
    }
    lp.examples_seen = lp.state->examples_seen;
    lp.pred = std::make_unique<ModelPredictor>(lp.state->model);
  } else if (a.predictor == "pinv") {
    lp.pred = std::make_unique<PinvPredictor>();
  } else if (a.predictor == "zero") {
    lp.pred = std::make_unique<ZeroPredictor>();
  } else if (a.predictor == "perfect-recall") {
    lp.pred = std::make_unique<PerfectRecallPredictor>();
  } else {
    throw Error(Errc::InvalidArgument, "unknown predictor '" + a.predictor + "'");
  }
  return lp;
}

NeedleConfig needle_config(int n, int pos, bool full, int n_configs, int n_inits, std::uint64_t seed) {
  NeedleConfig cfg = full ? NeedleConfig{} : NeedleConfig::desk(n, pos);
  cfg.n_systems = n;
  cfg.needle_position = pos;
  if (n_configs > 0) cfg.n_configs = n_configs;
  if (n_inits > 0) cfg.n_inits = n_inits;
  cfg.seed = seed;
  return cfg;
}

void print_records(const std::vector<MetricsRecord>& recs, std::ostream& out, std::size_t limit = 40) {
  for (std::size_t i = 0; i < recs.size() && i < limit; ++i) {
    const auto& r = recs[i];
    out << eval_kind_name(r.eval_kind) << ' ' << r.predictor << " N=" << r.haystack_size
        << " pos=" << r.needle_position;
    if (r.segment_position >= 0) out << " seg=" << r.segment_position;
    out << " k=" << r.index_within_segment << "  q25 " << r.quantiles.q25 << "  q50 " << r.quantiles.q50
        << "  q75 " << r.quantiles.q75 << '\n';
  }
  if (recs.size() > limit) out << "... " << recs.size() - limit << " more records\n";
}

// ----------------------------------------------------------------------- eval

struct EvalArgs {
  PredictorArgs p;
  fs::path library;
  std::string kind = "needle";
  int n = 5;
  int needle_pos = 0;
  bool full = false;
  int n_configs = 0;
  int n_inits = 0;
  std::size_t n_sequences = 1000;
  std::size_t n_traces = 40000;
  std::uint64_t seed = 0;
  std::string aggregation = "median";
  fs::path out;
  fs::path csv;
};

int cmd_eval(const EvalArgs& a, const Common& c, std::ostream& out) {
  auto m = c.manifest("eval");
  const TraceLibrary lib = read_library(a.library);
  m.input(a.library);
  m.seed("eval", a.seed);
  EvalOptions opts;
  opts.threads = c.thread_count();
  if (a.aggregation == "pooled") opts.aggregation = Aggregation::Pooled;
  else if (a.aggregation != "median") throw Error(Errc::InvalidArgument, "aggregation must be median or pooled");

  const NeedleConfig ncfg = needle_config(a.n, a.needle_pos, a.full, a.n_configs, a.n_inits, a.seed);
  int context = kContextLen;
  if (a.kind == "needle" || a.kind == "restart" || a.kind == "needle-sweep") {
    NeedleConfig probe = ncfg;
    if (a.kind == "needle-sweep") probe.needle_position = 0;
    NeedleDataset shape;
    shape.cfg = probe;
    context = shape.length();
  }
  LoadedPredictor lp = load_predictor(a.p, lib, context, m);
  opts.examples_seen = lp.examples_seen;

  std::vector<MetricsRecord> recs;
  if (a.kind == "uninterleaved") {
    recs = eval_uninterleaved(*lp.pred, lib, a.n_sequences, a.seed, opts);
  } else if (a.kind == "needle") {
    recs = eval_needle(*lp.pred, build_needle_dataset(lib, ncfg), opts);
  } else if (a.kind == "restart") {
    recs = eval_restart(*lp.pred, build_needle_dataset(lib, ncfg), opts);
  } else if (a.kind == "needle-sweep") {
    recs = eval_needle_position_sweep(*lp.pred, lib, ncfg, opts);
  } else if (a.kind == "pretrain") {
    const PretrainLoss pl = pretrain_loss(*lp.pred, lib, a.n_traces, a.seed, opts);
    for (const auto& [name, value] : {std::pair{lp.pred->name(), pl.value}, std::pair{std::string("pinv"), pl.baseline}}) {
      MetricsRecord r;
      r.checkpoint_examples_seen = opts.examples_seen;
      r.eval_kind = EvalKind::PretrainLoss;
      r.predictor = name;
      r.quantiles = {value, value, value};
      r.mean = value;
      r.n_samples = pl.n_positions;
      recs.push_back(r);
    }
  } else {
    throw Error(Errc::InvalidArgument, "unknown eval kind '" + a.kind + "'");
  }
  print_records(recs, out);
  write_ndjson(recs, a.out);
  m.output(a.out);
  if (!a.csv.empty()) {
    write_csv(recs, a.csv);
    m.output(a.csv);
  }
  m.write(manifest_path(a.out));
  return kExitOk;
}

// ------------------------------------------------------------------------ ood

struct OodArgs {
  PredictorArgs p;
  fs::path library;
  fs::path fresh_library;
  std::string kind = "swap";
  int n = 5;
  int needle_pos = 0;
  std::optional<int> wrong_segment;
  bool full = false;
  int n_configs = 0;
  int n_inits = 0;
  std::uint64_t seed = 0;
  fs::path out_dataset;
  fs::path out;
};

int cmd_ood(const OodArgs& a, const Common& c, std::ostream& out) {
  auto m = c.manifest("ood");
  const TraceLibrary lib = read_library(a.library);
  m.input(a.library);
  m.seed("ood", a.seed);
  const NeedleConfig cfg = needle_config(a.n, a.needle_pos, a.full, a.n_configs, a.n_inits, a.seed);
  NeedleDataset ds;
  const OodKind kind = parse_ood(a.kind);
  switch (kind) {
    case OodKind::SwapToWrongSeen: ds = make_swap(build_needle_dataset(lib, cfg), a.wrong_segment); break;
    case OodKind::SynchronizedRotations: {
      ds = make_synchronized(lib, cfg, a.seed);
      const double resid = synchronization_residual(ds, lib);
      out << "synchronization residual " << resid << '\n';
      if (!(resid <= 1e-12)) {
        throw Error(Errc::InvalidArgument, "synchronization check failed (residual " + std::to_string(resid) + ")");
      }
      break;
    }
    case OodKind::UnseenLabelMisdirect: ds = make_unseen_label(build_needle_dataset(lib, cfg)); break;
    case OodKind::SeenLabelNewSequence: {
      if (a.fresh_library.empty()) throw Error(Errc::InvalidArgument, "--fresh-library is required");
      const TraceLibrary fresh = read_library(a.fresh_library);
      m.input(a.fresh_library);
      ds = make_seen_label_new_sequence(build_needle_dataset(lib, cfg), fresh, lib);
      break;
    }
    case OodKind::None: throw Error(Errc::InvalidArgument, "choose an ood kind");
  }
  out << "dataset " << ood_name(ds.kind) << ": " << ds.n_traces() << " traces of length " << ds.length() << '\n';
  if (!a.out_dataset.empty()) {
    write_needle_dataset(ds, a.out_dataset);
    m.output(a.out_dataset);
  }
  if (!a.out.empty()) {
    LoadedPredictor lp = load_predictor(a.p, lib, ds.length(), m);
    EvalOptions opts;
    opts.threads = c.thread_count();
    opts.examples_seen = lp.examples_seen;
    const auto recs = eval_needle(*lp.pred, ds, opts);
    print_records(recs, out);
    write_ndjson(recs, a.out);
    m.output(a.out);
  }
  const fs::path primary = !a.out.empty() ? a.out : a.out_dataset;
  if (primary.empty()) throw Error(Errc::InvalidArgument, "give --out and/or --out-dataset");
  m.write(manifest_path(primary));
  return kExitOk;
}

// ---------------------------------------------------------------------- prune

struct PruneArgs {
  fs::path checkpoint;
  fs::path library;
  std::string task = "one-after";
  double k = 100.0;
  bool k_sweep = false;
  double sparsity = 0.98;
  int steps = 200;
  int batch = 16;
  int warmup = 50;
  double gate_lr = 0.1;
  int n = 5;
  int needle_pos = 0;
  int n_inits = 100;
  int config_index = 0;
  bool no_gate_embed = false;
  bool allow_family_mismatch = false;
  std::uint64_t seed = 0;
  fs::path out;
  fs::path metrics;
};

int cmd_prune(const PruneArgs& a, const Common& c, std::ostream& out) {
  auto m = c.manifest("prune");
  const TraceLibrary lib = read_library(a.library);
  m.input(a.library);
  const ModelState state = load_checkpoint(a.checkpoint);
  m.input(a.checkpoint);
  m.seed("gates", a.seed);
  if (state.family != lib.family && !a.allow_family_mismatch) throw Mismatch("checkpoint/library family mismatch");

  // One trace configuration: systems config_index .. config_index + N - 1.
  NeedleConfig cfg;
  cfg.n_systems = a.n;
  cfg.needle_position = a.needle_pos;
  cfg.n_configs = a.config_index + 1;
  cfg.n_inits = a.n_inits;
  cfg.seed = a.seed;
  NeedleDataset all = build_needle_dataset(lib, cfg);
  if (state.model.config().context_len < all.length()) throw Mismatch("task traces exceed the model context");
  NeedleDataset data = all;
  if (a.config_index > 0) {
    // Keep only the last configuration.
    const std::size_t t0 = all.trace_index(a.config_index, 0);
    const auto n = static_cast<std::size_t>(a.n);
    const auto l = static_cast<std::size_t>(cfg.seg_len);
    const auto ni = static_cast<std::size_t>(a.n_inits);
    auto cut = [&](auto& v, std::size_t per) {
      v.erase(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(t0 * per));
      v.resize(ni * per);
    };
    cut(data.pairs, n);
    cut(data.query_pair, 1);
    cut(data.haystack_seq, n);
    cut(data.test_seq, 1);
    cut(data.test_step0, 1);
    cut(data.test_slot, 1);
    cut(data.haystack, n * l * kStateDim);
    cut(data.test, l * kStateDim);
    data.cfg.n_configs = 1;
  }

  const CircuitTask task = parse_task(a.task);
  const EdgeGraph graph = EdgeGraph::for_model(state.model.config(), !a.no_gate_embed);
  const CircuitMse full = eval_circuit(state.model, Circuit::full(graph), data);
  out << "graph: " << graph.size() << " edges; full model MSE one-after " << full.one_after << ", two-after "
      << full.two_after << '\n';

  std::vector<double> ks = a.k_sweep ? std::vector<double>{1, 10, 100, 1000} : std::vector<double>{a.k};
  std::vector<MetricsRecord> recs;
  for (double k : ks) {
    GateTrainConfig gc;
    gc.k_scale = k;
    gc.sparsity_target = a.sparsity;
    gc.steps = a.steps;
    gc.batch = a.batch;
    gc.sparsity_warmup = a.warmup;
    gc.gate_lr = a.gate_lr;
    gc.gate_embed = !a.no_gate_embed;
    gc.seed = a.seed;
    const EdgeGateSet gates = train_gates(state.model, data, task, gc);
    Circuit circuit = quantize(gates, task, a.sparsity);
    circuit.mse = eval_circuit(state.model, circuit, data);
    fs::path path = a.out;
    if (a.k_sweep) path.replace_filename(a.out.stem().string() + "-k" + std::to_string(static_cast<long long>(k)) + a.out.extension().string());
    bin::write_file_atomic(path, export_circuit(circuit));
    m.output(path);
    out << "k " << k << ": kept " << circuit.kept_count() << " of " << graph.size() << " edges (sparsity "
        << circuit.sparsity() << "), MSE one-after " << circuit.mse.one_after << ", two-after "
        << circuit.mse.two_after << " -> " << path.string() << '\n';
    for (auto [idx, value] : {std::pair{1, circuit.mse.one_after}, std::pair{2, circuit.mse.two_after}}) {
      MetricsRecord r;
      r.checkpoint_examples_seen = state.examples_seen;
      r.eval_kind = EvalKind::Circuit;
      r.predictor = "circuit:" + std::string(task_name(task)) + ":k=" + std::to_string(k);
      r.haystack_size = a.n;
      r.needle_position = a.needle_pos;
      r.index_within_segment = idx;
      r.quantiles = {value, value, value};
      r.mean = value;
      r.n_samples = data.n_traces();
      recs.push_back(r);
    }
  }
  if (!a.metrics.empty()) {
    write_ndjson(recs, a.metrics);
    m.output(a.metrics);
  }
  m.write(manifest_path(a.out));
  return kExitOk;
}

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::Io:
    case Errc::CorruptFile: return kExitIo;
    case Errc::InvalidArgument:
    case Errc::UnknownPreset:
    case Errc::PairOutOfRange:
    case Errc::InvalidDims:
    case Errc::IndexCollision:
    case Errc::FamilyUnsupported:
    case Errc::NoFreeLabel:
    case Errc::InsufficientSystems:
    case Errc::UnsupportedArch: return kExitUsage;
    case Errc::GraphMismatch:
    case Errc::SystemCollision: return kExitMismatch;
    default: return kExitFailure;
  }
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Interleaved linear-system traces: data generation, training, evaluation and edge pruning"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML config file; command-line flags take precedence");
  app.option_defaults()->always_capture_default();
  Common common;
  common.argv.assign(argv, argv + argc);
  common.app = &app;
  app.add_option("--threads", common.threads, "Worker threads (default: $ILTS_THREADS or 1)");

  GenLibraryArgs gl;
  auto* s_gl = app.add_subcommand("gen-library", "Roll out a bank of state sequences");
  s_gl->add_option("--family", gl.family, "orthogonal | identity");
  s_gl->add_option("--systems", gl.systems, "Number of system matrices");
  s_gl->add_option("--inits", gl.inits, "Initial states per system");
  s_gl->add_option("--length", gl.length, "States per sequence");
  s_gl->add_option("--seed", gl.seed);
  s_gl->add_option("--role", gl.role, "train | test | auto");
  s_gl->add_option("--out", gl.out)->required();

  GenTracesArgs gt;
  auto* s_gt = app.add_subcommand("gen-traces", "Interleave a library into a batch of traces");
  s_gt->add_option("--library", gt.library)->required();
  s_gt->add_option("--count", gt.count);
  s_gt->add_option("--seed", gt.seed);
  s_gt->add_option("--first", gt.first, "Index of the first trace in the seed's stream");
  s_gt->add_option("--out", gt.out)->required();

  TrainArgs tr;
  auto* s_tr = app.add_subcommand("train", "Train a model on freshly interleaved batches");
  s_tr->add_option("--library", tr.library)->required();
  s_tr->add_option("--preset", tr.preset, "tiny | small | medium | big");
  s_tr->add_option("--batch", tr.batch);
  s_tr->add_option("--lr", tr.lr, "Override the preset learning rate");
  s_tr->add_option("--weight-decay", tr.weight_decay);
  s_tr->add_option("--steps", tr.steps, "Total optimizer steps");
  s_tr->add_option("--seed", tr.seed, "Initialization seed");
  s_tr->add_option("--data-seed", tr.data_seed);
  s_tr->add_option("--micro-batch", tr.micro_batch);
  s_tr->add_option("--schedule-start", tr.schedule_start, "First checkpoint (examples seen); doubles thereafter");
  s_tr->add_option("--save-every", tr.save_every, "Steps between latest.ilc refreshes");
  s_tr->add_flag("--resume", tr.resume, "Continue from out-dir/latest.ilc");
  s_tr->add_option("--out-dir", tr.out_dir)->required();

  auto add_predictor = [](CLI::App* s, PredictorArgs& p) {
    s->add_option("--checkpoint", p.checkpoint);
    s->add_option("--predictor", p.predictor, "model | pinv | zero | perfect-recall");
    s->add_flag("--allow-family-mismatch", p.allow_family_mismatch);
  };

  EvalArgs ev;
  auto* s_ev = app.add_subcommand("eval", "Evaluate a checkpoint or reference predictor");
  add_predictor(s_ev, ev.p);
  s_ev->add_option("--library", ev.library)->required();
  s_ev->add_option("--kind", ev.kind, "uninterleaved | needle | restart | needle-sweep | pretrain");
  s_ev->add_option("--N", ev.n, "Haystack size");
  s_ev->add_option("--needle-pos", ev.needle_pos, "Needle segment (-2 for the uncut control)");
  s_ev->add_flag("--full", ev.full, "50 configurations x 1000 inits");
  s_ev->add_option("--n-configs", ev.n_configs);
  s_ev->add_option("--n-inits", ev.n_inits);
  s_ev->add_option("--n-sequences", ev.n_sequences);
  s_ev->add_option("--n-traces", ev.n_traces);
  s_ev->add_option("--seed", ev.seed);
  s_ev->add_option("--aggregation", ev.aggregation, "median | pooled");
  s_ev->add_option("--out", ev.out)->required();
  s_ev->add_option("--csv", ev.csv);

  OodArgs od;
  auto* s_od = app.add_subcommand("ood", "Build (and optionally evaluate) an out-of-distribution dataset");
  add_predictor(s_od, od.p);
  s_od->add_option("--library", od.library)->required();
  s_od->add_option("--fresh-library", od.fresh_library);
  s_od->add_option("--kind", od.kind, "swap | sync | unseen-label | seen-label-new-sequence");
  s_od->add_option("--N", od.n);
  s_od->add_option("--needle-pos", od.needle_pos);
  s_od->add_option("--wrong-segment", od.wrong_segment);
  s_od->add_flag("--full", od.full);
  s_od->add_option("--n-configs", od.n_configs);
  s_od->add_option("--n-inits", od.n_inits);
  s_od->add_option("--seed", od.seed);
  s_od->add_option("--out-dataset", od.out_dataset);
  s_od->add_option("--out", od.out, "Metrics (requires a predictor)");

  PruneArgs pr;
  auto* s_pr = app.add_subcommand("prune", "Train edge gates and extract a circuit");
  s_pr->add_option("--checkpoint", pr.checkpoint)->required();
  s_pr->add_option("--library", pr.library)->required();
  s_pr->add_option("--task", pr.task, "one-after | two-after");
  s_pr->add_option("--k", pr.k, "Scale on the task squared error");
  s_pr->add_flag("--k-sweep", pr.k_sweep, "Run k in {1, 10, 100, 1000}");
  s_pr->add_option("--sparsity", pr.sparsity);
  s_pr->add_option("--steps", pr.steps);
  s_pr->add_option("--batch", pr.batch);
  s_pr->add_option("--warmup", pr.warmup, "Steps over which the target sparsity ramps up");
  s_pr->add_option("--gate-lr", pr.gate_lr);
  s_pr->add_option("--N", pr.n);
  s_pr->add_option("--needle-pos", pr.needle_pos);
  s_pr->add_option("--n-inits", pr.n_inits);
  s_pr->add_option("--config-index", pr.config_index);
  s_pr->add_flag("--no-gate-embed", pr.no_gate_embed);
  s_pr->add_flag("--allow-family-mismatch", pr.allow_family_mismatch);
  s_pr->add_option("--seed", pr.seed);
  s_pr->add_option("--out", pr.out)->required();
  s_pr->add_option("--metrics", pr.metrics);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*s_gl) return cmd_gen_library(gl, common, out);
    if (*s_gt) return cmd_gen_traces(gt, common, out);
    if (*s_tr) return cmd_train(tr, common, out);
    if (*s_ev) return cmd_eval(ev, common, out);
    if (*s_od) return cmd_ood(od, common, out);
    if (*s_pr) return cmd_prune(pr, common, out);
  } catch (const Mismatch& e) {
    err << "error: " << e.what() << '\n';
    return kExitMismatch;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace ilts::cli
