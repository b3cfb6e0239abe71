#pragma once

#include <optional>
#include <string>

#include "evmem/core/http_client.hpp"
#include "evmem/llm/provider.hpp"

namespace evmem {

/// Chat-completions client (OpenAI wire format). The template goes out as the
/// user message; the system message is sent only when non-empty.
class HttpChatProvider final : public ChatProvider {
 public:
  HttpChatProvider(std::string url, std::string key, std::string model)
      : url_(std::move(url)), key_(std::move(key)), model_(std::move(model)) {}

  /// Reads MEM_LLM_URL, MEM_LLM_KEY and MEM_LLM_MODEL.
  static std::optional<HttpChatProvider> from_env() {
    auto url = env_var("MEM_LLM_URL");
    if (!url) return std::nullopt;
    return HttpChatProvider(*url, env_var("MEM_LLM_KEY").value_or(""), env_var("MEM_LLM_MODEL").value_or("gpt-4o-mini"));
  }

  ChatResponse chat(const ChatRequest& request) override {
    if (request.user.empty()) throw Error(ErrorCode::validation, "chat request with empty user prompt");
    nlohmann::json messages = nlohmann::json::array();
    if (!request.system.empty()) messages.push_back({{"role", "system"}, {"content", request.system}});
    messages.push_back({{"role", "user"}, {"content", request.user}});
    const nlohmann::json body = {{"model", model_},
                                 {"messages", messages},
                                 {"temperature", request.temperature},
                                 {"max_tokens", request.max_tokens}};
    const auto reply = post_json(url_, key_, body);
    try {
      ChatResponse out;
      const auto& content = reply.at("choices").at(0).at("message").at("content");
      out.text = content.is_string() ? content.get<std::string>() : std::string{};
      if (reply.contains("usage") && reply["usage"].is_object()) {
        out.usage.prompt = reply["usage"].value("prompt_tokens", std::int64_t{0});
        out.usage.completion = reply["usage"].value("completion_tokens", std::int64_t{0});
      }
      return out;
    } catch (const nlohmann::json::exception& e) {
      throw TransportError(200, std::string("malformed chat reply: ") + e.what());
    }
  }

 private:
  std::string url_;
  std::string key_;
  std::string model_;
};

}  // namespace evmem
