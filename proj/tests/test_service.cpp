#include <gtest/gtest.h>

#include <thread>

#include "case_study.hpp"
#include "evmem/core/http_embedder.hpp"
#include "evmem/llm/http_chat.hpp"
#include "evmem/service/http_service.hpp"
#include "support.hpp"

using namespace evmem;
using evtest::code_of;

namespace {

/// httplib server on an ephemeral local port, stopped on destruction.
class LocalServer {
 public:
  LocalServer() {
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~LocalServer() {
    server_.stop();
    thread_.join();
  }
  httplib::Server& server() { return server_; }
  std::string url(const std::string& path) const { return "http://127.0.0.1:" + std::to_string(port_) + path; }
  int port() const { return port_; }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace

TEST(HttpChat, RateLimitIsTransportErrorWithStatus) {
  LocalServer s;
  s.server().Post("/v1/chat/completions", [](const httplib::Request&, httplib::Response& res) {
    res.status = 429;
    res.set_content("slow down", "text/plain");
  });
  HttpChatProvider chat(s.url("/v1/chat/completions"), "", "m");
  ChatRequest req;
  req.user = "hi";
  try {
    chat.chat(req);
    FAIL() << "expected a transport error";
  } catch (const TransportError& e) {
    EXPECT_EQ(e.status(), 429);
  }
}

TEST(HttpChat, ParsesCompletion) {
  LocalServer s;
  nlohmann::json seen;
  s.server().Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    seen = nlohmann::json::parse(req.body);
    res.set_content(R"({"choices":[{"message":{"content":"Sub-goal 1: a"}}],"usage":{"prompt_tokens":3,"completion_tokens":4}})",
                    "application/json");
  });
  HttpChatProvider chat(s.url("/v1/chat/completions"), "k", "m");
  ChatRequest req;
  req.user = "hi";
  const auto r = chat.chat(req);
  EXPECT_EQ(r.text, "Sub-goal 1: a");
  EXPECT_EQ(r.usage.completion, 4);
  EXPECT_EQ(seen["messages"].size(), 1u);
  EXPECT_EQ(seen["messages"][0]["role"], "user");
  EXPECT_EQ(seen["temperature"], 0.0);
}

TEST(HttpEmbedder, WireFormatAndFailures) {
  LocalServer s;
  s.server().Post("/v1/embeddings", [](const httplib::Request& req, httplib::Response& res) {
    const auto body = nlohmann::json::parse(req.body);
    nlohmann::json data = nlohmann::json::array();
    for (std::size_t i = 0; i < body["input"].size(); ++i) data.push_back({{"embedding", {1.0, 0.0, double(i)}}});
    res.set_content(nlohmann::json{{"data", data}}.dump(), "application/json");
  });
  HttpEmbedder emb(s.url("/v1/embeddings"), "", "bge-m3", 3);
  EXPECT_EQ(emb.embed_batch({"a", "b"})[1], (Vector{1.0, 0.0, 1.0}));
  HttpEmbedder wrong_dim(s.url("/v1/embeddings"), "", "bge-m3", 4);
  EXPECT_EQ(code_of([&] { wrong_dim.embed("a"); }), ErrorCode::dimension_mismatch);
  HttpEmbedder down("http://127.0.0.1:9/v1/embeddings", "", "m", 3);
  EXPECT_EQ(code_of([&] { down.embed("a"); }), ErrorCode::transport);
}

TEST(Service, IngestQueryGraphStats) {
  const std::string dir = EVMEM_CASE_DIR;
  const auto config = load_config(dir + "/config.json");
  auto llm = ScriptedProvider::from_file(dir + "/replay.jsonl");
  HashEmbedder emb(static_cast<std::size_t>(config.embedding_dim), config.embedding_seed);
  MemoryService service(Memory(config), llm, emb);
  LocalServer s;
  service.install(s.server());
  httplib::Client client("127.0.0.1", s.port());

  // Raw dialog lines grouped by session, in file order.
  std::vector<std::pair<std::string, std::string>> per_session;
  std::istringstream lines(evtest::read_text(dir + "/dialog.jsonl"));
  for (std::string line; std::getline(lines, line);) {
    if (line.empty()) continue;
    const auto sid = nlohmann::json::parse(line)["session_id"].get<std::string>();
    if (per_session.empty() || per_session.back().first != sid) per_session.emplace_back(sid, "");
    per_session.back().second += line + "\n";
  }
  ASSERT_GE(per_session.size(), 2u);
  for (const auto& [sid, body] : per_session) {
    auto res = client.Post("/v1/ingest", body, "application/x-ndjson");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 200) << res->body;
  }
  auto two = client.Post("/v1/ingest", per_session.front().second + per_session.back().second,
                         "application/x-ndjson");
  EXPECT_EQ(two->status, 400);

  auto graph = client.Get("/v1/graph");
  ASSERT_TRUE(graph);
  const auto loaded = load_snapshot(graph->body);
  EXPECT_EQ(snapshot(loaded), evtest::read_text(dir + "/store.json"));

  auto q = client.Post("/v1/query", nlohmann::json{{"question", case_study::kQuestion}}.dump(), "application/json");
  ASSERT_TRUE(q);
  ASSERT_EQ(q->status, 200) << q->body;
  const auto body = nlohmann::json::parse(q->body);
  EXPECT_EQ(body["answer"], case_study::kAnswer);
  EXPECT_TRUE(body.contains("evidence"));
  EXPECT_TRUE(body["stats"].is_object());

  auto bad = client.Post("/v1/query", "{}", "application/json");
  EXPECT_EQ(bad->status, 400);

  auto stats = client.Get("/v1/stats");
  ASSERT_TRUE(stats);
  EXPECT_EQ(nlohmann::json::parse(stats->body)["questions"], 1);
}
