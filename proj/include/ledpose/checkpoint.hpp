#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ledpose/optimizer.hpp"

namespace ledpose {

namespace detail {

inline constexpr char kCkptMagic[8] = {'L', 'P', 'C', 'K', 'P', 'T', '0', '1'};

template <class T>
inline void write_array(std::ofstream& f, const std::vector<T>& a) {
  f.write(reinterpret_cast<const char*>(a.data()),
          static_cast<std::streamsize>(a.size() * sizeof(T)));
}

template <class T>
inline void read_array(std::ifstream& f, std::vector<T>& a, const std::string& path) {
  f.read(reinterpret_cast<char*>(a.data()),
         static_cast<std::streamsize>(a.size() * sizeof(T)));
  if (!f) throw DataError("checkpoint: truncated array data in " + path);
}

}  // namespace detail

/// Self-describing checkpoint container: format tag, config echo, named
/// weight arrays, optional optimizer state, epoch and seed. Weights round
/// trip bit-exactly.
template <class T>
inline void save_checkpoint(FcnNet<T>& net, const AdamState<T>* opt, int epoch,
                            std::uint64_t seed, const nlohmann::json& extra,
                            const std::string& path) {
  auto params = net.params();
  nlohmann::json header;
  header["format_version"] = 1;
  const ModelConfig& c = net.config();
  header["model"] = {{"in_channels", c.in_channels},
                     {"stride", c.stride},
                     {"channels", c.channels},
                     {"fuse_channels", c.fuse_channels},
                     {"head_channels", c.head_channels},
                     {"led_count", c.led_count},
                     {"d_max", c.d_max}};
  header["epoch"] = epoch;
  header["seed"] = seed;
  header["extra"] = extra;
  header["scalar_bytes"] = sizeof(T);
  nlohmann::json arrays = nlohmann::json::array();
  for (const auto& p : params) arrays.push_back({{"name", p.name}, {"count", p.size}});
  header["arrays"] = arrays;
  nlohmann::json optj;
  optj["present"] = opt != nullptr && opt->initialized();
  if (opt != nullptr && opt->initialized()) {
    optj["step"] = opt->step;
    optj["beta1"] = opt->beta1;
    optj["beta2"] = opt->beta2;
    optj["eps"] = opt->eps;
  }
  header["optimizer"] = optj;

  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("checkpoint: cannot open for writing: " + path);
  f.write(detail::kCkptMagic, sizeof(detail::kCkptMagic));
  const std::string htext = header.dump();
  const std::uint64_t hlen = htext.size();
  f.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  f.write(htext.data(), static_cast<std::streamsize>(htext.size()));
  for (const auto& p : params) {
    std::vector<T> buf(p.data, p.data + p.size);
    detail::write_array(f, buf);
  }
  if (opt != nullptr && opt->initialized()) {
    for (const auto& mv : opt->m) detail::write_array(f, mv);
    for (const auto& vv : opt->v) detail::write_array(f, vv);
  }
  if (!f) throw DataError("checkpoint: write failed: " + path);
}

template <class T>
struct LoadedCheckpoint {
  FcnNet<T> net;
  AdamState<T> optimizer;
  bool has_optimizer = false;
  int epoch = 0;
  std::uint64_t seed = 0;
  nlohmann::json extra;
};

template <class T = float>
inline LoadedCheckpoint<T> load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("checkpoint: cannot open: " + path);
  char magic[8];
  f.read(magic, sizeof(magic));
  if (!f || std::memcmp(magic, detail::kCkptMagic, sizeof(magic)) != 0)
    throw DataError("checkpoint: bad magic in " + path);
  std::uint64_t hlen = 0;
  f.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  if (!f || hlen > (1u << 20)) throw DataError("checkpoint: bad header length in " + path);
  std::string htext(hlen, '\0');
  f.read(htext.data(), static_cast<std::streamsize>(hlen));
  if (!f) throw DataError("checkpoint: truncated header in " + path);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(htext);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint: unparsable header in " + path + ": " + e.what());
  }
  if (header.value("format_version", -1) != 1)
    throw DataError("checkpoint: unsupported format version in " + path);
  if (header.value("scalar_bytes", 0) != static_cast<int>(sizeof(T)))
    throw DataError("checkpoint: scalar width mismatch in " + path);

  ModelConfig cfg;
  const auto& m = header.at("model");
  cfg.in_channels = m.at("in_channels");
  cfg.stride = m.at("stride");
  for (std::size_t i = 0; i < cfg.channels.size(); ++i) cfg.channels[i] = m.at("channels")[i];
  cfg.fuse_channels = m.at("fuse_channels");
  cfg.head_channels = m.at("head_channels");
  cfg.led_count = m.at("led_count");
  cfg.d_max = m.at("d_max");

  LoadedCheckpoint<T> out{FcnNet<T>(cfg), AdamState<T>{}, false, 0, 0, {}};
  out.epoch = header.at("epoch");
  out.seed = header.at("seed");
  out.extra = header.value("extra", nlohmann::json::object());

  auto params = out.net.params();
  const auto& arrays = header.at("arrays");
  if (arrays.size() != params.size())
    throw DataError("checkpoint: parameter list mismatch in " + path);
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (arrays[i].at("name") != params[i].name ||
        arrays[i].at("count") != params[i].size)
      throw DataError("checkpoint: array layout mismatch at " + params[i].name + " in " + path);
    std::vector<T> buf(params[i].size);
    detail::read_array(f, buf, path);
    std::copy(buf.begin(), buf.end(), params[i].data);
  }

  const auto& optj = header.at("optimizer");
  if (optj.value("present", false)) {
    out.has_optimizer = true;
    out.optimizer.init(params);
    out.optimizer.step = optj.at("step");
    out.optimizer.beta1 = optj.at("beta1");
    out.optimizer.beta2 = optj.at("beta2");
    out.optimizer.eps = optj.at("eps");
    for (auto& mv : out.optimizer.m) detail::read_array(f, mv, path);
    for (auto& vv : out.optimizer.v) detail::read_array(f, vv, path);
  }
  return out;
}

}  // namespace ledpose
