#include <atomic>
#include <cstdlib>
#include <mutex>
#include <thread>

#include <gtest/gtest.h>

#include "probe/llm.hpp"
#include "support.hpp"

using namespace probe;
using namespace std::chrono_literals;

namespace {

// Chat-completions stand-in on a loopback port.
class MockServer {
 public:
  using Handler = std::function<void(const httplib::Request&, httplib::Response&, int call)>;

  explicit MockServer(Handler handler) : handler_(std::move(handler)) {
    server_.Post(R"(.*)", [this](const httplib::Request& req, httplib::Response& res) {
      const int call = ++calls_;
      {
        std::lock_guard lock(mu_);
        requests_.push_back(req);
      }
      handler_(req, res, call);
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~MockServer() {
    server_.stop();
    thread_.join();
  }
  MockServer(const MockServer&) = delete;
  MockServer& operator=(const MockServer&) = delete;

  std::string url(const std::string& path = "/v1") const {
    return "http://127.0.0.1:" + std::to_string(port_) + path;
  }
  int calls() const { return calls_; }
  std::vector<httplib::Request> requests() const {
    std::lock_guard lock(mu_);
    return requests_;
  }

 private:
  Handler handler_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int> calls_{0};
  mutable std::mutex mu_;
  std::vector<httplib::Request> requests_;
};

std::string completion(const std::string& text) {
  Json j;
  j["choices"] = Json::array({{{"message", {{"role", "assistant"}, {"content", text}}}}});
  return j.dump();
}

// Answers with the call number so repeated network calls are visible.
void counting(const httplib::Request&, httplib::Response& res, int call) {
  res.set_content(completion("answer " + std::to_string(call)), "application/json");
}

BackendConfig config_for(const MockServer& s) {
  BackendConfig c;
  c.kind = BackendKind::llm;
  c.endpoint_url = s.url();
  c.model_name = "mock-model";
  c.max_retries = 2;
  c.backoff_base = 1ms;
  c.request_timeout = 5s;
  return c;
}

class ScopedEnv {
 public:
  ScopedEnv(const char* name, const char* value) : name_(name) {
    if (const char* old = std::getenv(name)) old_ = old;
    if (value) ::setenv(name, value, 1);
    else ::unsetenv(name);
  }
  ~ScopedEnv() {
    if (old_) ::setenv(name_, old_->c_str(), 1);
    else ::unsetenv(name_);
  }

 private:
  const char* name_;
  std::optional<std::string> old_;
};

}  // namespace

TEST(Endpoint, Parsing) {
  auto e = parse_endpoint("https://api.example.com/v1");
  EXPECT_EQ(e.origin, "https://api.example.com");
  EXPECT_EQ(e.path, "/v1/chat/completions");
  e = parse_endpoint("http://localhost:8080/v1/chat/completions/");
  EXPECT_EQ(e.origin, "http://localhost:8080");
  EXPECT_EQ(e.path, "/v1/chat/completions");
  EXPECT_EQ(parse_endpoint("http://h").path, "/chat/completions");
  EXPECT_THROW(parse_endpoint("api.example.com/v1"), SpecError);
  EXPECT_THROW(parse_endpoint("ftp://h/v1"), SpecError);
}

TEST(Query, SingleUserMessageWithBearerKey) {
  ScopedEnv key(kApiKeyEnv, "sk-test-123");
  MockServer server(counting);
  const auto rec = query_llm("Say hi", config_for(server));
  EXPECT_EQ(rec.raw_text, "answer 1");
  EXPECT_FALSE(rec.cached);
  EXPECT_EQ(rec.backend, "llm:mock-model");
  ASSERT_TRUE(rec.timestamp);

  const auto reqs = server.requests();
  ASSERT_EQ(reqs.size(), 1u);
  EXPECT_EQ(reqs[0].path, "/v1/chat/completions");
  EXPECT_EQ(reqs[0].get_header_value("Authorization"), "Bearer sk-test-123");
  const auto body = Json::parse(reqs[0].body);
  EXPECT_EQ(body["model"], "mock-model");
  ASSERT_EQ(body["messages"].size(), 1u);
  EXPECT_EQ(body["messages"][0]["role"], "user");
  EXPECT_EQ(body["messages"][0]["content"], "Say hi");
  EXPECT_EQ(body["temperature"], 0.0);
  EXPECT_EQ(body["max_tokens"], 200);
}

TEST(Query, NoKeyMeansNoAuthorizationHeader) {
  ScopedEnv key(kApiKeyEnv, nullptr);
  MockServer server(counting);
  query_llm("x", config_for(server));
  EXPECT_FALSE(server.requests()[0].has_header("Authorization"));
}

TEST(Query, RetriesThenGivesUp) {
  MockServer server([](const httplib::Request&, httplib::Response& res, int) {
    res.status = 500;
    res.set_content("boom", "text/plain");
  });
  EXPECT_THROW(query_llm("x", config_for(server)), TransportError);
  EXPECT_EQ(server.calls(), 3);
}

TEST(Query, RateLimitIsRetried) {
  MockServer server([](const httplib::Request& req, httplib::Response& res, int call) {
    if (call < 3) {
      res.status = 429;
      return;
    }
    counting(req, res, call);
  });
  EXPECT_EQ(query_llm("x", config_for(server)).raw_text, "answer 3");
}

TEST(Query, ClientErrorIsNotRetried) {
  MockServer server([](const httplib::Request&, httplib::Response& res, int) {
    res.status = 401;
    res.set_content("{\"error\":\"bad key\"}", "application/json");
  });
  try {
    query_llm("x", config_for(server));
    FAIL() << "expected ApiError";
  } catch (const ApiError& e) {
    EXPECT_EQ(e.status(), 401);
  }
  EXPECT_EQ(server.calls(), 1);
}

TEST(Query, MalformedBodyIsApiError) {
  MockServer server([](const httplib::Request&, httplib::Response& res, int) {
    res.set_content("{\"choices\":[]}", "application/json");
  });
  EXPECT_THROW(query_llm("x", config_for(server)), ApiError);
}

TEST(Query, UnreachableEndpointIsTransportError) {
  BackendConfig c;
  c.endpoint_url = "http://127.0.0.1:1/v1";
  c.model_name = "m";
  c.max_retries = 1;
  c.backoff_base = 1ms;
  c.request_timeout = 1s;
  EXPECT_THROW(query_llm("x", c), TransportError);
}

TEST(Cache, HitSkipsNetwork) {
  support::TempDir dir;
  MockServer server(counting);
  auto c = config_for(server);
  c.cache_dir = dir.path();
  const auto first = query_llm("prompt A", c);
  const auto second = query_llm("prompt A", c);
  EXPECT_EQ(server.calls(), 1);
  EXPECT_FALSE(first.cached);
  EXPECT_TRUE(second.cached);
  EXPECT_EQ(second.raw_text, first.raw_text);
  EXPECT_EQ(second.timestamp, first.timestamp);
}

TEST(Cache, KeyCoversEveryRequestField) {
  support::TempDir dir;
  MockServer server(counting);
  auto c = config_for(server);
  c.cache_dir = dir.path();
  query_llm("p", c);
  auto other_prompt = c;
  query_llm("q", other_prompt);
  auto other_model = c;
  other_model.model_name = "mock-model-2";
  query_llm("p", other_model);
  auto other_temp = c;
  other_temp.temperature = 0.5;
  query_llm("p", other_temp);
  auto other_max = c;
  other_max.max_tokens = 10;
  query_llm("p", other_max);
  EXPECT_EQ(server.calls(), 5);
  EXPECT_EQ(query_llm("p", c).raw_text, "answer 1");
  EXPECT_EQ(server.calls(), 5);
}

TEST(Batch, OrderAndPerTrialErrors) {
  const auto trials = gen_exp1(support::fixture_bank(Lang::en), 24, 1, Exp1Variant::a);
  const auto bad_prompt = render_prompt(trials[5], "default", Lang::en);
  MockServer server([&](const httplib::Request& req, httplib::Response& res, int) {
    const auto prompt = Json::parse(req.body)["messages"][0]["content"].get<std::string>();
    if (prompt == bad_prompt) {
      res.status = 400;
      return;
    }
    res.set_content(completion(prompt.substr(prompt.rfind("‘"))), "application/json");
  });
  auto c = config_for(server);
  c.parallelism = 4;
  std::size_t last_done = 0;
  const auto out = respond_llm(trials, c, TemplateSet::builtin(), "default",
                               [&](std::size_t done, std::size_t total) {
                                 EXPECT_EQ(total, trials.size());
                                 last_done = std::max(last_done, done);
                               });
  ASSERT_EQ(out.size(), trials.size());
  EXPECT_EQ(last_done, trials.size());
  for (std::size_t i = 0; i < trials.size(); ++i) {
    EXPECT_EQ(out[i].trial_id, trials[i].trial_id);
    EXPECT_EQ(out[i].backend, "llm:mock-model");
    if (i == 5) {
      ASSERT_TRUE(out[i].error);
      EXPECT_NE(out[i].error->find("400"), std::string::npos);
    } else {
      EXPECT_FALSE(out[i].error);
      EXPECT_EQ(out[i].raw_text,
                "‘" + text::detokenize(trials[i].test.tokens, Lang::en) + "’");
    }
  }
}
