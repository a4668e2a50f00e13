#include "mvil/dataset.hpp"

#include "mvil/png_io.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace mvil {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string frame_name(int t) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d.png", t);
  return buf;
}

json config_to_json(const EnvConfig& cfg) {
  json j;
  j["task"] = to_string(cfg.task);
  j["variant"] = to_string(cfg.variant);
  j["distractor_count"] = cfg.distractor_count;
  j["background_texture_id"] = cfg.background_texture_id;
  j["seed"] = cfg.seed;
  return j;
}

EnvConfig config_from_json(const json& j) {
  EnvConfig cfg;
  cfg.task = task_from_string(j.at("task").get<std::string>());
  cfg.variant = variant_from_string(j.at("variant").get<std::string>());
  cfg.distractor_count = j.at("distractor_count").get<int>();
  cfg.background_texture_id = j.at("background_texture_id").get<int>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  return cfg;
}

}  // namespace

void save_episode(const std::string& episode_dir, const Episode& episode) {
  fs::create_directories(episode_dir);
  for (const char* sub : {"o_h", "o_f", "mask_h", "mask_f"}) fs::create_directories(fs::path(episode_dir) / sub);

  std::ofstream steps(fs::path(episode_dir) / "steps.jsonl");
  if (!steps) throw std::runtime_error("cannot write steps.jsonl under " + episode_dir);
  for (int t = 0; t < episode.length(); ++t) {
    const EpisodeStep& st = episode.steps[static_cast<std::size_t>(t)];
    write_png((fs::path(episode_dir) / "o_h" / frame_name(t)).string(), st.obs.o_h);
    write_png((fs::path(episode_dir) / "o_f" / frame_name(t)).string(), st.obs.o_f);
    write_mask_png((fs::path(episode_dir) / "mask_h" / frame_name(t)).string(), st.mask_h);
    write_mask_png((fs::path(episode_dir) / "mask_f" / frame_name(t)).string(), st.mask_f);
    json line;
    line["t"] = t;
    line["proprio"] = st.obs.o_p;
    line["action"] = {st.action.dx, st.action.dy, st.action.gripper};
    line["done"] = st.done;
    line["success"] = st.success;
    steps << line.dump() << "\n";
  }

  json meta;
  meta["config"] = config_to_json(episode.config);
  meta["success"] = episode.success;
  meta["length"] = episode.length();
  std::ofstream out(fs::path(episode_dir) / "episode.json");
  out << meta.dump(2) << "\n";
  if (!out) throw std::runtime_error("cannot write episode.json under " + episode_dir);
}

Episode load_episode(const std::string& episode_dir) {
  Episode ep;
  {
    std::ifstream in(fs::path(episode_dir) / "episode.json");
    if (!in) throw std::runtime_error("missing episode.json under " + episode_dir);
    json meta = json::parse(in);
    ep.config = config_from_json(meta.at("config"));
    ep.success = meta.at("success").get<bool>();
  }
  std::ifstream steps(fs::path(episode_dir) / "steps.jsonl");
  if (!steps) throw std::runtime_error("missing steps.jsonl under " + episode_dir);
  std::string line;
  while (std::getline(steps, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    EpisodeStep st;
    const int t = j.at("t").get<int>();
    st.obs.o_h = read_png((fs::path(episode_dir) / "o_h" / frame_name(t)).string());
    st.obs.o_f = read_png((fs::path(episode_dir) / "o_f" / frame_name(t)).string());
    st.mask_h = read_mask_png((fs::path(episode_dir) / "mask_h" / frame_name(t)).string());
    st.mask_f = read_mask_png((fs::path(episode_dir) / "mask_f" / frame_name(t)).string());
    const auto p = j.at("proprio").get<std::array<double, 5>>();
    st.obs.o_p = p;
    const auto a = j.at("action").get<std::array<double, 3>>();
    st.action = {a[0], a[1], a[2]};
    st.done = j.at("done").get<bool>();
    st.success = j.at("success").get<bool>();
    ep.steps.push_back(std::move(st));
  }
  return ep;
}

void save_dataset(const std::string& root, const std::vector<Episode>& episodes) {
  fs::create_directories(root);
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "ep%04zu", i);
    save_episode((fs::path(root) / buf).string(), episodes[i]);
  }
}

std::vector<std::string> list_episode_dirs(const std::string& root) {
  std::vector<std::string> dirs;
  if (!fs::is_directory(root)) throw std::runtime_error("dataset directory not found: " + root);
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory() && entry.path().filename().string().rfind("ep", 0) == 0)
      dirs.push_back(entry.path().string());
  }
  std::sort(dirs.begin(), dirs.end());
  return dirs;
}

std::vector<Episode> load_dataset(const std::string& root) {
  std::vector<Episode> episodes;
  for (const std::string& dir : list_episode_dirs(root)) episodes.push_back(load_episode(dir));
  return episodes;
}

void append_mask_metadata(const std::string& root, const MaskSequence& seq) {
  std::ofstream out(fs::path(root) / "masks.jsonl", std::ios::app);
  if (!out) throw std::runtime_error("cannot write masks.jsonl under " + root);
  for (int v = 0; v < 2; ++v) {
    json j;
    j["episode_id"] = seq.episode_id;
    j["viewpoint"] = v == 0 ? "in_hand" : "first_person";
    j["source"] = seq.source == MaskSource::ground_truth ? "ground_truth" : "detected_tracked";
    j["tracking_lost"] = seq.tracking_lost[static_cast<std::size_t>(v)];
    out << j.dump() << "\n";
  }
}

}  // namespace mvil
