#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include <spdlog/spdlog.h>

#include "evmem/core/embedding.hpp"
#include "evmem/core/http_client.hpp"
#include "evmem/core/http_embedder.hpp"
#include "evmem/core/memory.hpp"
#include "evmem/llm/http_chat.hpp"
#include "evmem/llm/provider.hpp"

namespace evmem::cli {

/// MEM_LLM_REPLAY (a recorded fixture) wins over MEM_LLM_URL (a live endpoint).
inline std::unique_ptr<ChatProvider> provider_from_env() {
  if (auto replay = env_var("MEM_LLM_REPLAY")) {
    spdlog::info("answering prompts from replay fixture {}", *replay);
    return std::make_unique<ScriptedProvider>(ScriptedProvider::from_file(*replay));
  }
  if (env_var("MEM_LLM_URL")) return std::make_unique<HttpChatProvider>(*HttpChatProvider::from_env());
  throw Error(ErrorCode::config, "no language model configured: set MEM_LLM_REPLAY or MEM_LLM_URL");
}

inline std::unique_ptr<Embedder> embedder_for(const Config& config) {
  const auto dim = static_cast<std::size_t>(config.embedding_dim);
  if (env_var("MEM_EMBED_URL")) return std::make_unique<HttpEmbedder>(*HttpEmbedder::from_env(dim));
  spdlog::warn("MEM_EMBED_URL not set; using the offline hash embedder");
  return std::make_unique<HashEmbedder>(dim, config.embedding_seed);
}

inline Memory open_or_create(const std::filesystem::path& store, const std::string& config_path) {
  if (std::filesystem::exists(store)) {
    if (!config_path.empty()) spdlog::warn("store {} exists; its recorded configuration is used", store.string());
    return load_snapshot_file(store);
  }
  return Memory(config_path.empty() ? Config{} : load_config(config_path));
}

}  // namespace evmem::cli
