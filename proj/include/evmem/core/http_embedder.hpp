#pragma once

#include <string>
#include <vector>

#include "evmem/core/embedding.hpp"
#include "evmem/core/http_client.hpp"

namespace evmem {

/// Embedding service speaking the OpenAI embeddings wire format:
/// request {"input": [texts], "model": m}, reply {"data": [{"embedding": [...]}]}.
class HttpEmbedder final : public Embedder {
 public:
  HttpEmbedder(std::string url, std::string key, std::string model, std::size_t dimension)
      : url_(std::move(url)), key_(std::move(key)), model_(std::move(model)), dim_(dimension) {}

  /// Reads MEM_EMBED_URL, MEM_EMBED_KEY and MEM_EMBED_MODEL (default "bge-m3").
  static std::optional<HttpEmbedder> from_env(std::size_t dimension) {
    auto url = env_var("MEM_EMBED_URL");
    if (!url) return std::nullopt;
    return HttpEmbedder(*url, env_var("MEM_EMBED_KEY").value_or(""), env_var("MEM_EMBED_MODEL").value_or("bge-m3"),
                        dimension);
  }

  std::size_t dimension() const override { return dim_; }
  std::string name() const override { return "http:" + model_; }

  Vector embed(std::string_view text) const override { return embed_batch({std::string(text)}).front(); }

  std::vector<Vector> embed_batch(const std::vector<std::string>& texts) const override {
    for (const auto& t : texts) require_text(t);
    const auto reply = post_json(url_, key_, {{"input", texts}, {"model", model_}});
    std::vector<Vector> out;
    try {
      const auto& data = reply.at("data");
      if (!data.is_array() || data.size() != texts.size())
        throw TransportError(200, "embedding reply has wrong number of vectors");
      for (const auto& item : data) {
        Vector v = item.at("embedding").get<Vector>();
        if (v.size() != dim_) {
          throw Error(ErrorCode::dimension_mismatch, "provider returned dimension " + std::to_string(v.size()) +
                                                         ", expected " + std::to_string(dim_));
        }
        out.push_back(std::move(v));
      }
    } catch (const nlohmann::json::exception& e) {
      throw TransportError(200, std::string("malformed embedding reply: ") + e.what());
    }
    return out;
  }

 private:
  std::string url_;
  std::string key_;
  std::string model_;
  std::size_t dim_;
};

}  // namespace evmem
