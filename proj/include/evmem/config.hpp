#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "evmem/core/json_fields.hpp"
#include "evmem/error.hpp"

namespace evmem {

/// Construction and search parameters. Defaults are the published hyperparameters
/// for dialog memory; `long_document()` widens retrieval for book-length inputs.
struct Config {
  // construction
  double merge_threshold = 0.9;
  double topic_threshold = 0.9;
  int recluster_period = 4;
  std::uint64_t kmeans_seed = 42;
  std::uint64_t id_seed = 0;  // 0: clock + entropy ids; otherwise reproducible ids

  // embeddings
  int embedding_dim = 64;
  std::uint64_t embedding_seed = 0x5eed;

  // search
  int top_k = 5;
  int top_p_topics = 5;
  int num_explorers = 3;
  int max_refinement_rounds = 1;
  int subgoal_min = 2;
  int subgoal_max = 5;
  int path_step_cap = 32;

  // llm
  double temperature = 0.0;
  int max_tokens = 1024;
  int llm_retries = 1;
  std::string empty_binding = "placeholder";  // "placeholder" renders "(none)", "error" rejects

  // harness
  int bench_workers = 1;

  static Config long_document() {
    Config c;
    c.top_k = 10;
    return c;
  }

  void validate() const {
    auto fail = [](const std::string& m) { throw Error(ErrorCode::config, m); };
    if (!(merge_threshold > 0.0 && merge_threshold <= 1.0)) fail("merge_threshold must be in (0, 1]");
    if (!(topic_threshold > 0.0 && topic_threshold <= 1.0)) fail("topic_threshold must be in (0, 1]");
    if (recluster_period < 1) fail("recluster_period must be >= 1");
    if (embedding_dim < 1) fail("embedding_dim must be >= 1");
    if (top_k < 1) fail("top_k must be >= 1");
    if (top_p_topics < 0) fail("top_p_topics must be >= 0");
    if (num_explorers < 1) fail("num_explorers must be >= 1");
    if (max_refinement_rounds < 0) fail("max_refinement_rounds must be >= 0");
    if (subgoal_min < 1 || subgoal_max < subgoal_min) fail("need 1 <= subgoal_min <= subgoal_max");
    if (path_step_cap < 1) fail("path_step_cap must be >= 1");
    if (llm_retries < 0) fail("llm_retries must be >= 0");
    if (empty_binding != "placeholder" && empty_binding != "error")
      fail("empty_binding must be \"placeholder\" or \"error\"");
    if (bench_workers < 1) fail("bench_workers must be >= 1");
  }
};

EVMEM_JSON_FIELDS(Config, merge_threshold, topic_threshold, recluster_period, kmeans_seed, id_seed, embedding_dim, embedding_seed, top_k, top_p_topics, num_explorers, max_refinement_rounds, subgoal_min, subgoal_max, path_step_cap, temperature, max_tokens, llm_retries, empty_binding, bench_workers)

/// Reads a flat JSON object of config keys. Unknown keys are rejected so typos surface.
inline Config config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::config, "config document must be a JSON object");
  const nlohmann::json known = Config{};
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw Error(ErrorCode::config, "unknown config key '" + key + "'");
    if (value.is_object() || value.is_array()) throw Error(ErrorCode::config, "config key '" + key + "' is not flat");
  }
  Config c;
  try {
    c = j.get<Config>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::config, e.what());
  }
  c.validate();
  return c;
}

inline Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::config, "cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  nlohmann::json j = nlohmann::json::parse(ss.str(), nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::config, "config file " + path + " is not valid JSON");
  return config_from_json(j);
}

}  // namespace evmem
