#include "mvil/checkpoint.hpp"

#include <json.hpp>

#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace mvil {

using nlohmann::json;

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  json header;
  header["format"] = "mvil-checkpoint-v1";
  json params = json::object();
  std::uint64_t offset = 0;
  for (const auto& [name, entry] : ckpt.params) {
    json p;
    p["shape"] = entry.shape;
    p["offset"] = offset;
    params[name] = p;
    offset += entry.data.size() * sizeof(float);
  }
  header["params"] = params;
  header["order"] = json::array();
  for (const auto& [name, entry] : ckpt.params) header["order"].push_back(name);
  header["meta"] = ckpt.meta;

  const std::string hs = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  const std::uint32_t len = static_cast<std::uint32_t>(hs.size());
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  for (const auto& [name, entry] : ckpt.params)
    out.write(reinterpret_cast<const char*>(entry.data.data()),
              static_cast<std::streamsize>(entry.data.size() * sizeof(float)));
  if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  std::uint32_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in) throw std::runtime_error("truncated checkpoint header: " + path);
  std::string hs(len, '\0');
  in.read(hs.data(), len);
  if (!in) throw std::runtime_error("truncated checkpoint header: " + path);
  json header = json::parse(hs);
  if (header.value("format", "") != std::string("mvil-checkpoint-v1"))
    throw std::runtime_error("not an mvil checkpoint: " + path);

  Checkpoint ckpt;
  if (header.contains("meta"))
    for (auto& [k, v] : header["meta"].items()) ckpt.meta[k] = v.get<std::string>();

  for (const auto& name_json : header["order"]) {
    const std::string name = name_json.get<std::string>();
    const json& p = header["params"].at(name);
    Checkpoint::Entry entry;
    entry.shape = p["shape"].get<std::vector<int>>();
    std::size_t n = 1;
    for (int e : entry.shape) n *= static_cast<std::size_t>(e);
    entry.data.resize(n);
    in.read(reinterpret_cast<char*>(entry.data.data()),
            static_cast<std::streamsize>(n * sizeof(float)));
    if (!in) throw std::runtime_error("truncated checkpoint payload: " + path);
    ckpt.params.emplace_back(name, std::move(entry));
  }
  return ckpt;
}

}  // namespace mvil
