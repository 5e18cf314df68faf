#include "ilts/circuits.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <random>
#include <sstream>

namespace ilts {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// log(-l / r): shift between log alpha and the probability of a nonzero gate.
const double kL0Shift = std::log(-kGateLeft / kGateRight);

std::vector<InterleavedTrace> traces_for(const NeedleDataset& data, std::size_t first, std::size_t count) {
  std::vector<InterleavedTrace> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(data.trace((first + i) % data.n_traces()));
  return out;
}

ad::Matrix<float> stack_tokens(const std::vector<InterleavedTrace>& traces) {
  const int seq = traces.front().length();
  ad::Matrix<float> tokens(static_cast<Eigen::Index>(traces.size()) * seq, kTokenDim);
  for (std::size_t b = 0; b < traces.size(); ++b) {
    tokens.middleRows(static_cast<Eigen::Index>(b) * seq, seq) = traces[b].tokens.cast<float>();
  }
  return tokens;
}

std::string fmt(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

}  // namespace

std::string_view task_name(CircuitTask task) {
  return task == CircuitTask::OneAfter ? "one-after" : "two-after";
}

CircuitTask parse_task(std::string_view name) {
  if (name == "one-after") return CircuitTask::OneAfter;
  if (name == "two-after") return CircuitTask::TwoAfter;
  throw Error(Errc::InvalidArgument, "unknown task '" + std::string(name) + "'");
}

std::vector<double> EdgeGateSet::deterministic() const {
  std::vector<double> out(log_alpha.size());
  for (std::size_t e = 0; e < out.size(); ++e) {
    out[e] = std::clamp(sigmoid(log_alpha[e]) * (kGateRight - kGateLeft) + kGateLeft, 0.0, 1.0);
  }
  return out;
}

std::vector<double> EdgeGateSet::scores() const {
  std::vector<double> out(log_alpha.size());
  for (std::size_t e = 0; e < out.size(); ++e) out[e] = sigmoid(log_alpha[e]);
  return out;
}

double EdgeGateSet::expected_sparsity() const {
  double kept = 0.0;
  for (double a : log_alpha) kept += sigmoid(a - kGateBeta * kL0Shift);
  return 1.0 - kept / static_cast<double>(log_alpha.size());
}

int task_row(const NeedleDataset& data, CircuitTask task) {
  return data.after_final_row(static_cast<int>(task));
}

EdgeGateSet train_gates(const Transformer<float>& model, const NeedleDataset& data, CircuitTask task,
                        const GateTrainConfig& cfg) {
  EdgeGateSet gs;
  gs.graph = EdgeGraph::for_model(model.config(), cfg.gate_embed);
  gs.k_scale = cfg.k_scale;
  gs.sparsity_target = cfg.sparsity_target;
  const std::size_t n_edges = gs.graph.size();
  gs.log_alpha.assign(n_edges, cfg.init_log_alpha);
  std::vector<double> m(n_edges, 0.0), v(n_edges, 0.0);
  const int row = task_row(data, task);
  const auto batch = static_cast<std::size_t>(std::max(1, cfg.batch));
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;

  std::vector<double> u_stretch(n_edges);
  std::vector<double> dz_da(n_edges);
  for (int step = 0; step < cfg.steps; ++step) {
    const auto traces = traces_for(data, static_cast<std::size_t>(step) * batch, batch);
    const int seq = traces.front().length();
    const ad::Matrix<float> tokens = stack_tokens(traces);
    ad::Matrix<float> targets = ad::Matrix<float>::Zero(tokens.rows(), kStateDim);
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(tokens.rows()), 0);
    for (std::size_t b = 0; b < batch; ++b) {
      const auto r = static_cast<Eigen::Index>(b) * seq + row;
      mask[static_cast<std::size_t>(r)] = 1;
      targets.row(r) = traces[b].targets.row(row).cast<float>();
    }

    // Hard-concrete sample per edge.
    Rng rng = make_rng(cfg.seed, static_cast<std::uint64_t>(step));
    std::uniform_real_distribution<double> unif(1e-6, 1.0 - 1e-6);
    ad::Matrix<float> z(1, static_cast<Eigen::Index>(n_edges));
    for (std::size_t e = 0; e < n_edges; ++e) {
      const double u = unif(rng);
      const double s = sigmoid((std::log(u) - std::log1p(-u) + gs.log_alpha[e]) / kGateBeta);
      const double stretched = s * (kGateRight - kGateLeft) + kGateLeft;
      z(0, static_cast<Eigen::Index>(e)) = static_cast<float>(std::clamp(stretched, 0.0, 1.0));
      dz_da[e] = (stretched > 0.0 && stretched < 1.0) ? (kGateRight - kGateLeft) * s * (1.0 - s) / kGateBeta : 0.0;
    }

    ad::Tape<float> tape;
    auto gates = tape.make(z, true);
    auto pred = disentangled_forward(tape, model, gs.graph, gates, tokens, static_cast<int>(batch), seq);
    auto task_loss = ad::masked_sse(tape, pred, targets, mask,
                                    static_cast<float>(cfg.k_scale / (static_cast<double>(batch) * kStateDim)));
    tape.backward(task_loss);

    const double ramp = cfg.sparsity_warmup > 0 ? std::min(1.0, static_cast<double>(step + 1) / cfg.sparsity_warmup) : 1.0;
    const double target = cfg.sparsity_target * ramp;
    const double s_hat = gs.expected_sparsity();
    const double gap = s_hat - target;
    const double edge_loss = gs.lambda1 * gap + gs.lambda2 * gap * gap;
    const double total = static_cast<double>(task_loss->value(0, 0)) + edge_loss;
    if (!std::isfinite(total)) {
      throw Error(Errc::Diverged, "gate loss became non-finite at step " + std::to_string(step));
    }
    gs.loss_history.push_back(total);

    const double dl_dshat = gs.lambda1 + 2.0 * gs.lambda2 * gap;
    const double t = static_cast<double>(step + 1);
    for (std::size_t e = 0; e < n_edges; ++e) {
      const double g_task = gates->has_grad() ? static_cast<double>(gates->grad(0, static_cast<Eigen::Index>(e))) : 0.0;
      const double p = sigmoid(gs.log_alpha[e] - kGateBeta * kL0Shift);
      const double dshat = -p * (1.0 - p) / static_cast<double>(n_edges);
      const double g = g_task * dz_da[e] + dl_dshat * dshat;
      m[e] = b1 * m[e] + (1.0 - b1) * g;
      v[e] = b2 * v[e] + (1.0 - b2) * g * g;
      const double mh = m[e] / (1.0 - std::pow(b1, t));
      const double vh = v[e] / (1.0 - std::pow(b2, t));
      gs.log_alpha[e] -= cfg.gate_lr * mh / (std::sqrt(vh) + eps);
    }
    gs.lambda1 += cfg.lambda_lr * gap;
    gs.lambda2 += cfg.lambda_lr * gap * gap;
  }
  return gs;
}

std::size_t kept_at(const std::vector<double>& scores, double threshold) {
  return static_cast<std::size_t>(
      std::count_if(scores.begin(), scores.end(), [&](double s) { return s >= threshold; }));
}

Circuit quantize(const EdgeGateSet& gates, CircuitTask task, double sparsity_target, double precision) {
  const auto scores = gates.scores();
  const auto n = static_cast<double>(scores.size());
  auto sparsity = [&](double tau) { return 1.0 - static_cast<double>(kept_at(scores, tau)) / n; };
  double lo = 0.0, hi = 1.0;
  while (hi - lo > precision) {
    const double mid = 0.5 * (lo + hi);
    if (sparsity(mid) >= sparsity_target) hi = mid;
    else lo = mid;
  }
  Circuit c;
  c.graph = gates.graph;
  c.task = task;
  c.k_scale = gates.k_scale;
  c.threshold = hi;
  c.kept.resize(scores.size());
  for (std::size_t e = 0; e < scores.size(); ++e) c.kept[e] = scores[e] >= hi ? 1 : 0;
  return c;
}

std::size_t Circuit::kept_count() const {
  return static_cast<std::size_t>(std::count(kept.begin(), kept.end(), std::uint8_t{1}));
}

double Circuit::sparsity() const {
  if (kept.empty()) return 1.0;
  return 1.0 - static_cast<double>(kept_count()) / static_cast<double>(kept.size());
}

Circuit Circuit::full(const EdgeGraph& graph) {
  Circuit c;
  c.graph = graph;
  c.kept.assign(graph.size(), 1);
  return c;
}

Circuit Circuit::empty(const EdgeGraph& graph) {
  Circuit c;
  c.graph = graph;
  c.kept.assign(graph.size(), 0);
  c.threshold = 1.0;
  return c;
}

CircuitMse eval_circuit(const Transformer<float>& model, const Circuit& circuit, const NeedleDataset& data,
                        int batch) {
  ad::Matrix<float> gates(1, static_cast<Eigen::Index>(circuit.kept.size()));
  for (std::size_t e = 0; e < circuit.kept.size(); ++e) {
    gates(0, static_cast<Eigen::Index>(e)) = circuit.kept[e] ? 1.0f : 0.0f;
  }
  const int r1 = task_row(data, CircuitTask::OneAfter);
  const int r2 = task_row(data, CircuitTask::TwoAfter);
  const std::size_t nt = data.n_traces();
  const auto chunk = static_cast<std::size_t>(std::max(1, batch));
  double s1 = 0.0, s2 = 0.0;
  for (std::size_t first = 0; first < nt; first += chunk) {
    const std::size_t count = std::min(chunk, nt - first);
    const auto traces = traces_for(data, first, count);
    const int seq = traces.front().length();
    const auto pred = disentangled_predict(model, circuit.graph, gates, stack_tokens(traces),
                                           static_cast<int>(count), seq);
    for (std::size_t b = 0; b < count; ++b) {
      const auto base = static_cast<Eigen::Index>(b) * seq;
      s1 += (pred.row(base + r1).cast<double>() - traces[b].targets.row(r1)).squaredNorm();
      s2 += (pred.row(base + r2).cast<double>() - traces[b].targets.row(r2)).squaredNorm();
    }
  }
  return {s1 / static_cast<double>(nt), s2 / static_cast<double>(nt)};
}

Overlap overlap(const Circuit& a, const Circuit& b) {
  if (!a.graph.same_shape(b.graph) || a.kept.size() != b.kept.size()) {
    throw Error(Errc::GraphMismatch, "circuits come from different graphs");
  }
  std::size_t shared = 0, uni = 0;
  for (std::size_t e = 0; e < a.kept.size(); ++e) {
    shared += (a.kept[e] && b.kept[e]) ? 1 : 0;
    uni += (a.kept[e] || b.kept[e]) ? 1 : 0;
  }
  return {shared, uni == 0 ? 0.0 : static_cast<double>(shared) / static_cast<double>(uni)};
}

std::string export_circuit(const Circuit& c) {
  std::ostringstream os;
  os << "// circuit\n"
     << "// layers " << c.graph.n_layers() << '\n'
     << "// heads " << c.graph.n_heads() << '\n'
     << "// gate_embed " << (c.graph.gate_embed() ? 1 : 0) << '\n'
     << "// task " << task_name(c.task) << '\n'
     << "// k_scale " << fmt(c.k_scale) << '\n'
     << "// threshold " << fmt(c.threshold) << '\n'
     << "// sparsity " << fmt(c.sparsity()) << '\n'
     << "// edges " << c.kept_count() << " of " << c.kept.size() << '\n'
     << "// mse_one_after " << fmt(c.mse.one_after) << '\n'
     << "// mse_two_after " << fmt(c.mse.two_after) << '\n'
     << "digraph circuit {\n";
  for (std::size_t e = 0; e < c.kept.size(); ++e) {
    if (!c.kept[e]) continue;
    const Edge& ed = c.graph.edges()[e];
    os << "  \"" << c.graph.writers()[static_cast<std::size_t>(ed.src)].name() << "\" -> \""
       << c.graph.readers()[static_cast<std::size_t>(ed.dst)].name() << "\";\n";
  }
  os << "}\n";
  return os.str();
}

Circuit parse_circuit(std::string_view text) {
  auto bad = [](const std::string& why) { return Error(Errc::CorruptFile, "circuit: " + why); };
  std::istringstream in{std::string(text)};
  std::string line;
  int layers = -1, heads = -1, gate_embed = 1;
  Circuit c;
  bool body = false, closed = false;
  std::vector<std::pair<std::string, std::string>> edges;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (!body && line.starts_with("//")) {
      std::istringstream hs(line.substr(2));
      std::string key;
      hs >> key;
      if (key == "layers") hs >> layers;
      else if (key == "heads") hs >> heads;
      else if (key == "gate_embed") hs >> gate_embed;
      else if (key == "task") {
        std::string t;
        hs >> t;
        c.task = parse_task(t);
      } else if (key == "k_scale") hs >> c.k_scale;
      else if (key == "threshold") hs >> c.threshold;
      else if (key == "mse_one_after") hs >> c.mse.one_after;
      else if (key == "mse_two_after") hs >> c.mse.two_after;
      continue;
    }
    if (line == "digraph circuit {") {
      body = true;
      continue;
    }
    if (line == "}") {
      closed = true;
      break;
    }
    if (!body) throw bad("unexpected line before graph body");
    const auto q1 = line.find('"');
    const auto q2 = line.find('"', q1 + 1);
    const auto arrow = line.find("->", q2);
    const auto q3 = line.find('"', arrow);
    const auto q4 = line.find('"', q3 + 1);
    if (q1 == std::string::npos || q2 == std::string::npos || arrow == std::string::npos ||
        q3 == std::string::npos || q4 == std::string::npos) {
      throw bad("malformed edge line '" + line + "'");
    }
    edges.emplace_back(line.substr(q1 + 1, q2 - q1 - 1), line.substr(q3 + 1, q4 - q3 - 1));
  }
  if (!closed) throw bad("missing closing brace");
  if (layers <= 0 || heads <= 0) throw bad("missing graph shape header");
  c.graph = EdgeGraph(layers, heads, gate_embed != 0);
  c.kept.assign(c.graph.size(), 0);
  for (const auto& [src, dst] : edges) {
    int e = -1;
    try {
      e = c.graph.find_edge(src, dst);
    } catch (const Error&) {
    }
    if (e < 0) throw bad("unknown edge " + src + " -> " + dst);
    c.kept[static_cast<std::size_t>(e)] = 1;
  }
  return c;
}

}  // namespace ilts
