#include "ilts/edge_graph.hpp"

#include <charconv>
#include <string>

namespace ilts {

std::string NodeId::name() const {
  const std::string l = std::to_string(layer);
  const std::string h = std::to_string(head);
  switch (kind) {
    case NodeKind::Embed: return "embed";
    case NodeKind::AttnHeadOut: return "a" + l + ".h" + h;
    case NodeKind::Mlp: return "m" + l;
    case NodeKind::AttnQ: return "a" + l + ".h" + h + ".q";
    case NodeKind::AttnK: return "a" + l + ".h" + h + ".k";
    case NodeKind::AttnV: return "a" + l + ".h" + h + ".v";
    case NodeKind::ResidPost: return "resid_post";
  }
  return "?";
}

namespace {

bool take_int(std::string_view& s, int& out) {
  const auto* end = s.data() + s.size();
  const auto [p, ec] = std::from_chars(s.data(), end, out);
  if (ec != std::errc() || p == s.data() || out < 0) return false;
  s.remove_prefix(static_cast<std::size_t>(p - s.data()));
  return true;
}

}  // namespace

NodeId NodeId::parse(std::string_view name) {
  const auto bad = [&] { return Error(Errc::InvalidArgument, "bad node name '" + std::string(name) + "'"); };
  if (name == "embed") return {NodeKind::Embed, -1, -1};
  if (name == "resid_post") return {NodeKind::ResidPost, -1, -1};
  std::string_view s = name;
  NodeId id;
  if (s.starts_with("m")) {
    s.remove_prefix(1);
    if (!take_int(s, id.layer) || !s.empty()) throw bad();
    id.kind = NodeKind::Mlp;
    return id;
  }
  if (!s.starts_with("a")) throw bad();
  s.remove_prefix(1);
  if (!take_int(s, id.layer) || !s.starts_with(".h")) throw bad();
  s.remove_prefix(2);
  if (!take_int(s, id.head)) throw bad();
  if (s.empty()) id.kind = NodeKind::AttnHeadOut;
  else if (s == ".q") id.kind = NodeKind::AttnQ;
  else if (s == ".k") id.kind = NodeKind::AttnK;
  else if (s == ".v") id.kind = NodeKind::AttnV;
  else throw bad();
  return id;
}

EdgeGraph::EdgeGraph(int n_layers, int n_heads, bool gate_embed)
    : n_layers_(n_layers), n_heads_(n_heads), gate_embed_(gate_embed) {
  if (n_layers <= 0 || n_heads <= 0) throw Error(Errc::InvalidArgument, "graph needs layers and heads");
  writers_.push_back({NodeKind::Embed, -1, -1});
  for (int l = 0; l < n_layers; ++l) {
    for (int h = 0; h < n_heads; ++h) writers_.push_back({NodeKind::AttnHeadOut, l, h});
    writers_.push_back({NodeKind::Mlp, l, -1});
  }
  for (int l = 0; l < n_layers; ++l) {
    for (auto kind : {NodeKind::AttnQ, NodeKind::AttnK, NodeKind::AttnV}) {
      for (int h = 0; h < n_heads; ++h) readers_.push_back({kind, l, h});
    }
    readers_.push_back({NodeKind::Mlp, l, -1});
  }
  readers_.push_back({NodeKind::ResidPost, -1, -1});

  edge_of_.assign(readers_.size(), std::vector<int>(writers_.size(), -1));
  for (std::size_t r = 0; r < readers_.size(); ++r) {
    const NodeId& rd = readers_[r];
    int upto = static_cast<int>(writers_.size());
    if (rd.kind == NodeKind::Mlp) upto = writers_before(rd.layer) + n_heads_;
    else if (rd.kind != NodeKind::ResidPost) upto = writers_before(rd.layer);
    for (int w = gate_embed ? 0 : 1; w < upto; ++w) {
      edge_of_[r][static_cast<std::size_t>(w)] = static_cast<int>(edges_.size());
      edges_.push_back({w, static_cast<int>(r)});
    }
  }
}

EdgeGraph EdgeGraph::for_model(const ModelConfig& cfg, bool gate_embed) {
  if (cfg.size == SizePreset::Custom) {
    throw Error(Errc::UnsupportedArch, "edge graphs are defined for the size presets only");
  }
  const ModelConfig ref = ModelConfig::preset(cfg.size);
  if (ref.n_layers != cfg.n_layers || ref.n_heads != cfg.n_heads || ref.d_model != cfg.d_model) {
    throw Error(Errc::UnsupportedArch, "model does not match its declared preset");
  }
  return EdgeGraph(cfg.n_layers, cfg.n_heads, gate_embed);
}

int EdgeGraph::reader_index(const NodeId& node) const {
  for (std::size_t i = 0; i < readers_.size(); ++i) {
    if (readers_[i] == node) return static_cast<int>(i);
  }
  return -1;
}

int EdgeGraph::writer_index(const NodeId& node) const {
  for (std::size_t i = 0; i < writers_.size(); ++i) {
    if (writers_[i] == node) return static_cast<int>(i);
  }
  return -1;
}

int EdgeGraph::edge_index(int writer, int reader) const {
  if (reader < 0 || writer < 0 || static_cast<std::size_t>(reader) >= readers_.size() ||
      static_cast<std::size_t>(writer) >= writers_.size()) {
    return -1;
  }
  return edge_of_[static_cast<std::size_t>(reader)][static_cast<std::size_t>(writer)];
}

int EdgeGraph::find_edge(std::string_view src, std::string_view dst) const {
  return edge_index(writer_index(NodeId::parse(src)), reader_index(NodeId::parse(dst)));
}

std::string EdgeGraph::edge_name(std::size_t e) const {
  const Edge& ed = edges_.at(e);
  return writers_[static_cast<std::size_t>(ed.src)].name() + " -> " +
         readers_[static_cast<std::size_t>(ed.dst)].name();
}

std::size_t edge_count_formula(int n_layers, int n_heads, int embed_writers) {
  // Writers visible to the attention readers of layer l: E + l (H + 1).
  const auto L = static_cast<std::size_t>(n_layers);
  const auto H = static_cast<std::size_t>(n_heads);
  const auto E = static_cast<std::size_t>(embed_writers);
  const std::size_t sum_w = L * E + (H + 1) * L * (L - 1) / 2;
  return 3 * H * sum_w + (sum_w + L * H) + (E + L * (H + 1));
}

}  // namespace ilts
