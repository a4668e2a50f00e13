#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace mvil {

// On-disk checkpoint. Layout:
//   uint32 (little-endian)  byte length of the JSON header
//   JSON header             {"format":"mvil-checkpoint-v1",
//                            "params":{name:{"shape":[...],"offset":N}},
//                            "meta":{...free-form strings...}}
//   payload                 little-endian 32-bit floats, densely packed in
//                           offset order
struct Checkpoint {
  struct Entry {
    std::vector<int> shape;
    std::vector<float> data;
  };
  // Insertion-ordered parameter list; order defines payload offsets.
  std::vector<std::pair<std::string, Entry>> params;
  std::map<std::string, std::string> meta;

  const Entry* find(const std::string& name) const {
    for (const auto& [n, e] : params)
      if (n == name) return &e;
    return nullptr;
  }
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace mvil
