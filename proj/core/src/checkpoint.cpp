#include "ilts/checkpoint.hpp"

#include <json.hpp>

#include "ilts/binary.hpp"

namespace ilts {

namespace {

constexpr std::string_view kCheckpointMagic = "ILTC";
constexpr std::uint32_t kCheckpointVersion = 1;
constexpr std::uint8_t kDtypeF32 = 1;

using nlohmann::json;

json model_json(const ModelConfig& c) {
  return {{"n_layers", c.n_layers}, {"d_model", c.d_model},       {"n_heads", c.n_heads},
          {"d_head", c.d_head},     {"context_len", c.context_len}, {"in_dim", c.in_dim},
          {"out_dim", c.out_dim},   {"size", preset_name(c.size)}};
}

json train_json(const TrainConfig& c) {
  return {{"batch_size", c.batch_size}, {"learning_rate", c.learning_rate},
          {"weight_decay", c.weight_decay}, {"beta1", c.beta1},
          {"beta2", c.beta2},           {"eps", c.eps},
          {"seed", c.seed},             {"micro_batch", c.micro_batch},
          {"checkpoint_schedule", c.checkpoint_schedule}};
}

ModelConfig model_from(const json& j) {
  ModelConfig c;
  c.n_layers = j.at("n_layers");
  c.d_model = j.at("d_model");
  c.n_heads = j.at("n_heads");
  c.d_head = j.at("d_head");
  c.context_len = j.at("context_len");
  c.in_dim = j.at("in_dim");
  c.out_dim = j.at("out_dim");
  const std::string size = j.at("size");
  c.size = size == "custom" ? SizePreset::Custom : parse_preset(size);
  return c;
}

TrainConfig train_from(const json& j) {
  TrainConfig c;
  c.batch_size = j.at("batch_size");
  c.learning_rate = j.at("learning_rate");
  c.weight_decay = j.at("weight_decay");
  c.beta1 = j.at("beta1");
  c.beta2 = j.at("beta2");
  c.eps = j.at("eps");
  c.seed = j.at("seed");
  c.micro_batch = j.at("micro_batch");
  c.checkpoint_schedule = j.at("checkpoint_schedule").get<std::vector<std::uint64_t>>();
  return c;
}

}  // namespace

std::string model_config_json(const ModelConfig& cfg) { return model_json(cfg).dump(); }
std::string train_config_json(const TrainConfig& cfg) { return train_json(cfg).dump(); }

void save_checkpoint(const ModelState& state, const std::filesystem::path& path) {
  bin::Writer w;
  w.put_magic(kCheckpointMagic);
  w.put<std::uint32_t>(kCheckpointVersion);
  const json meta = {{"model", model_json(state.model.config())},
                     {"train", train_json(state.train)},
                     {"examples_seen", state.examples_seen},
                     {"step", state.step},
                     {"data_seed", state.data_seed},
                     {"family", family_name(state.family)}};
  w.put_string(meta.dump());
  const auto& params = state.model.params();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    w.put_string(p.name);
    w.put<std::uint8_t>(kDtypeF32);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(p.value.rows()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(p.value.cols()));
    const auto n = static_cast<std::size_t>(p.value.size());
    w.put_array(std::span<const float>(p.value.data(), n));
    w.put_array(std::span<const float>(p.m.data(), n));
    w.put_array(std::span<const float>(p.v.data(), n));
  }
  w.seal();
  bin::write_file_atomic(path, w.bytes());
}

ModelState load_checkpoint(const std::filesystem::path& path) {
  bin::Reader r(bin::read_file(path), "checkpoint " + path.string());
  r.verify_seal();
  r.expect_magic(kCheckpointMagic);
  if (r.get<std::uint32_t>() != kCheckpointVersion) r.fail("unsupported version");
  json meta;
  try {
    meta = json::parse(r.get_string());
  } catch (const json::exception& e) {
    r.fail(std::string("metadata: ") + e.what());
  }
  ModelState state;
  try {
    const ModelConfig mc = model_from(meta.at("model"));
    state.model = Transformer<float>(mc, 0);
    state.train = train_from(meta.at("train"));
    state.examples_seen = meta.at("examples_seen");
    state.step = meta.at("step");
    state.data_seed = meta.at("data_seed");
    state.family = parse_family(meta.at("family").get<std::string>());
  } catch (const json::exception& e) {
    r.fail(std::string("metadata: ") + e.what());
  } catch (const Error& e) {
    r.fail(std::string("metadata: ") + e.what());
  }
  auto& params = state.model.params();
  if (r.get<std::uint32_t>() != params.size()) r.fail("tensor count does not match config");
  for (auto& p : params) {
    if (r.get_string() != p.name) r.fail("tensor name mismatch for " + p.name);
    if (r.get<std::uint8_t>() != kDtypeF32) r.fail("unsupported dtype for " + p.name);
    const auto rows = r.get<std::uint32_t>();
    const auto cols = r.get<std::uint32_t>();
    if (rows != p.value.rows() || cols != p.value.cols()) r.fail("shape mismatch for " + p.name);
    const auto n = static_cast<std::size_t>(p.value.size());
    r.get_array(std::span<float>(p.value.data(), n));
    r.get_array(std::span<float>(p.m.data(), n));
    r.get_array(std::span<float>(p.v.data(), n));
  }
  if (!r.at_end()) r.fail("trailing bytes");
  return state;
}

}  // namespace ilts
