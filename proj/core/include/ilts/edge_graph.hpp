#pragma once

// Writer/reader graph of the disentangled residual stream.
//
// Writers: embed (token embedding plus positions), one node per attention head
// (a{l}.h{h}) and one per MLP (m{l}). Readers: the query, key and value inputs
// of every head (a{l}.h{h}.q/.k/.v), every MLP and the final resid_post. A
// reader is fed by every writer that precedes it in the forward pass: head
// inputs of layer l see embed and all of layers < l, m{l} additionally sees the
// heads of layer l, and resid_post sees everything.

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "ilts/transformer.hpp"

namespace ilts {

enum class NodeKind : std::uint8_t { Embed, AttnHeadOut, Mlp, AttnQ, AttnK, AttnV, ResidPost };

struct NodeId {
  NodeKind kind = NodeKind::Embed;
  int layer = -1;
  int head = -1;

  std::string name() const;
  static NodeId parse(std::string_view name);  // Errc::InvalidArgument

  friend auto operator<=>(const NodeId&, const NodeId&) = default;
};

struct Edge {
  int src = 0;  // writer index
  int dst = 0;  // reader index
};

class EdgeGraph {
 public:
  EdgeGraph() = default;
  // With gate_embed off, embed still feeds every reader but through ungated,
  // uncounted connections.
  EdgeGraph(int n_layers, int n_heads, bool gate_embed = true);
  // Errc::UnsupportedArch for models that are not one of the size presets.
  static EdgeGraph for_model(const ModelConfig& cfg, bool gate_embed = true);

  int n_layers() const { return n_layers_; }
  int n_heads() const { return n_heads_; }
  bool gate_embed() const { return gate_embed_; }

  const std::vector<NodeId>& writers() const { return writers_; }
  const std::vector<NodeId>& readers() const { return readers_; }
  const std::vector<Edge>& edges() const { return edges_; }
  std::size_t size() const { return edges_.size(); }

  int head_writer(int layer, int head) const { return 1 + layer * (n_heads_ + 1) + head; }
  int mlp_writer(int layer) const { return 1 + layer * (n_heads_ + 1) + n_heads_; }
  // Writers [0, n) feed the attention readers of `layer`.
  int writers_before(int layer) const { return 1 + layer * (n_heads_ + 1); }
  int reader_index(const NodeId& node) const;  // -1 if absent
  int writer_index(const NodeId& node) const;  // -1 if absent

  // Edge index for writer -> reader, -1 if ungated or absent.
  int edge_index(int writer, int reader) const;
  int find_edge(std::string_view src, std::string_view dst) const;
  std::string edge_name(std::size_t e) const;

  bool same_shape(const EdgeGraph& other) const {
    return n_layers_ == other.n_layers_ && n_heads_ == other.n_heads_ && gate_embed_ == other.gate_embed_;
  }

 private:
  int n_layers_ = 0;
  int n_heads_ = 0;
  bool gate_embed_ = true;
  std::vector<NodeId> writers_;
  std::vector<NodeId> readers_;
  std::vector<Edge> edges_;
  std::vector<std::vector<int>> edge_of_;  // [reader][writer] -> edge or -1
};

// Closed-form edge count with `embed_writers` gated embedding writers.
std::size_t edge_count_formula(int n_layers, int n_heads, int embed_writers);

}  // namespace ilts
