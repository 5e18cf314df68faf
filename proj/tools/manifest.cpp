#include "manifest.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include <openssl/evp.h>

#include <json.hpp>

#include "ilts/binary.hpp"

#ifndef ILTS_VERSION
#define ILTS_VERSION "unknown"
#endif

namespace ilts::cli {

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot read " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return os.str();
}

RunManifest::RunManifest(std::string command, std::vector<std::string> argv, std::string config)
    : command_(std::move(command)),
      argv_(std::move(argv)),
      config_(std::move(config)),
      start_(std::chrono::steady_clock::now()),
      started_at_(std::chrono::system_clock::now()) {}

void RunManifest::write(const std::filesystem::path& path) const {
  using nlohmann::json;
  auto files = [](const std::vector<std::filesystem::path>& paths) {
    json arr = json::array();
    for (const auto& p : paths) arr.push_back({{"path", p.string()}, {"sha256", sha256_file(p)}});
    return arr;
  };
  const auto t = std::chrono::system_clock::to_time_t(started_at_);
  std::ostringstream when;
  when << std::put_time(std::gmtime(&t), "%Y-%m-%dT%H:%M:%SZ");
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  const json j = {{"command", command_},
                  {"argv", argv_},
                  {"config", config_},
                  {"seeds", seeds_},
                  {"code_version", ILTS_VERSION},
                  {"inputs", files(inputs_)},
                  {"outputs", files(outputs_)},
                  {"started_at", when.str()},
                  {"wall_clock_seconds", secs}};
  bin::write_file_atomic(path, j.dump(2) + "\n");
}

}  // namespace ilts::cli
