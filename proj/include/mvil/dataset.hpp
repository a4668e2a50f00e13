#pragma once

#include "mvil/region.hpp"
#include "mvil/sim.hpp"

#include <string>
#include <vector>

namespace mvil {

// On-disk episode layout under <root>/ep%04d/:
//   o_h/%04d.png, o_f/%04d.png        frames per view
//   mask_h/%04d.png, mask_f/%04d.png  task-region masks (1-bit PNG)
//   steps.jsonl                       proprio, action, flags per line
//   episode.json                      config, seed, success
// A masks.jsonl at the root records mask-sequence metadata (episode id,
// viewpoint, tracking-lost flags) when masks were rebuilt by the tracker.

void save_episode(const std::string& episode_dir, const Episode& episode);
Episode load_episode(const std::string& episode_dir);

void save_dataset(const std::string& root, const std::vector<Episode>& episodes);
std::vector<Episode> load_dataset(const std::string& root);
std::vector<std::string> list_episode_dirs(const std::string& root);

void append_mask_metadata(const std::string& root, const MaskSequence& seq);

}  // namespace mvil
