#pragma once

#include <string>
#include <string_view>

#include <spdlog/spdlog.h>

#include "evmem/config.hpp"
#include "evmem/llm/provider.hpp"
#include "evmem/llm/templates.hpp"

namespace evmem {

/// Renders `template_id` and attaches the replay key derived from `salient`.
inline ChatRequest make_request(std::string_view template_id, const Bindings& bindings, const Bindings& salient,
                                const Config& config) {
  ChatRequest r;
  r.user = render_prompt(template_id, bindings, empty_binding_policy(config.empty_binding));
  r.temperature = config.temperature;
  r.max_tokens = config.max_tokens;
  r.template_id = std::string(template_id);
  r.replay_key = replay_key(template_id, salient);
  r.salient = salient;
  return r;
}

/// Sends `request` and parses the reply, retrying `retries` more times when
/// the transport or the parser fails. The last error propagates.
template <typename Parse>
auto chat_and_parse(ChatProvider& llm, const ChatRequest& request, int retries, Parse&& parse)
    -> decltype(parse(std::string_view{})) {
  for (int attempt = 0;; ++attempt) {
    try {
      const auto reply = llm.chat(request);
      return parse(std::string_view(reply.text));
    } catch (const Error& e) {
      if (attempt >= retries) throw;
      spdlog::warn("{} call failed ({}); retrying", request.template_id, e.what());
    }
  }
}

}  // namespace evmem
