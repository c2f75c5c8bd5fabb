#ifndef PROBE_LLM_HPP
#define PROBE_LLM_HPP

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>

#include "probe/error.hpp"
#include "probe/io.hpp"
#include "probe/manifest.hpp"
#include "probe/participants.hpp"
#include "probe/prompt.hpp"
#include "probe/rng.hpp"

namespace probe {

inline constexpr const char* kApiKeyEnv = "PROBE_API_KEY";

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

/// Accepts either a base URL ("https://host/v1") or the full
/// chat-completions URL.
inline Endpoint parse_endpoint(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw SpecError("endpoint needs a scheme: " + url);
  const auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") throw SpecError("unsupported scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  Endpoint e;
  e.origin = url.substr(0, path_start);
  e.path = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!e.path.empty() && e.path.back() == '/') e.path.pop_back();
  const std::string suffix = "/chat/completions";
  if (e.path.size() < suffix.size() ||
      e.path.compare(e.path.size() - suffix.size(), suffix.size(), suffix) != 0)
    e.path += suffix;
  return e;
}

/// A single user message and nothing else: no system prompt, no history.
inline Json chat_request_body(const std::string& prompt, const BackendConfig& config) {
  Json body;
  body["model"] = config.model_name;
  body["messages"] = Json::array({{{"role", "user"}, {"content", prompt}}});
  body["temperature"] = config.temperature;
  body["max_tokens"] = config.max_tokens;
  return body;
}

inline std::string cache_key(const std::string& prompt, const BackendConfig& config) {
  Json key;
  key["endpoint"] = config.endpoint_url;
  key["model"] = config.model_name;
  key["prompt"] = prompt;
  key["temperature"] = config.temperature;
  key["max_tokens"] = config.max_tokens;
  return hash::sha256_hex(key.dump());
}

inline std::string llm_backend_name(const BackendConfig& config) {
  return "llm:" + config.model_name;
}

inline bool retryable_status(int status) { return status == 408 || status == 429 || status >= 500; }

inline std::string extract_completion(int status, const std::string& body) {
  try {
    const auto j = Json::parse(body);
    const auto& content = j.at("choices").at(0).at("message").at("content");
    if (content.is_null()) return "";
    return content.get<std::string>();
  } catch (const Json::exception&) {
    throw ApiError(status, "unexpected response body: " + body.substr(0, 500));
  }
}

/// One chat completion, served from the on-disk cache when possible.
/// Rate limits, 5xx and transport failures are retried with exponential
/// backoff and jitter; other non-2xx statuses raise ApiError at once.
inline ResponseRecord query_llm(const std::string& prompt, const BackendConfig& config) {
  config.validate();
  ResponseRecord rec;
  rec.backend = llm_backend_name(config);

  const auto key = cache_key(prompt, config);
  std::filesystem::path cache_file;
  if (!config.cache_dir.empty()) {
    cache_file = config.cache_dir / (key + ".json");
    if (std::filesystem::exists(cache_file)) {
      const auto j = Json::parse(io::read_file(cache_file));
      rec.raw_text = j.at("raw_text").get<std::string>();
      rec.cached = true;
      rec.timestamp = j.value("timestamp", std::string());
      return rec;
    }
  }

  const auto ep = parse_endpoint(config.endpoint_url);
  httplib::Client client(ep.origin);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config.request_timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(
      config.request_timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());
  httplib::Headers headers;
  if (const char* api_key = std::getenv(kApiKeyEnv); api_key && *api_key)
    headers.emplace("Authorization", std::string("Bearer ") + api_key);
  const auto body = chat_request_body(prompt, config).dump();

  Rng jitter = make_rng(hash_tag(key));
  std::string last_failure;
  const auto t0 = std::chrono::steady_clock::now();
  for (int attempt = 0; attempt <= config.max_retries; ++attempt) {
    if (attempt > 0) {
      const double scale = static_cast<double>(1ULL << std::min(attempt - 1, 16));
      const auto wait = std::chrono::duration<double, std::milli>(
          static_cast<double>(config.backoff_base.count()) * scale * (0.5 + uniform01(jitter)));
      std::this_thread::sleep_for(wait);
    }
    auto res = client.Post(ep.path, headers, body, "application/json");
    if (!res) {
      last_failure = "transport: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 200 && res->status < 300) {
      rec.raw_text = extract_completion(res->status, res->body);
      rec.latency_ms = std::chrono::duration<double, std::milli>(
                           std::chrono::steady_clock::now() - t0)
                           .count();
      rec.timestamp = utc_timestamp();
      if (!cache_file.empty()) {
        Json entry;
        entry["key"] = key;
        entry["model"] = config.model_name;
        entry["raw_text"] = rec.raw_text;
        entry["timestamp"] = *rec.timestamp;
        io::write_file_atomic(cache_file, entry.dump() + "\n");
      }
      return rec;
    }
    if (!retryable_status(res->status)) throw ApiError(res->status, res->body);
    last_failure = "HTTP " + std::to_string(res->status);
  }
  throw TransportError("giving up after " + std::to_string(config.max_retries) +
                       " retries: " + last_failure);
}

/// Renders and queries every trial with at most `config.parallelism`
/// requests in flight. Failures are recorded per trial instead of
/// aborting the batch. Output order follows `trials`.
inline std::vector<ResponseRecord> respond_llm(
    const std::vector<Trial>& trials, const BackendConfig& config, const TemplateSet& templates,
    const std::string& template_id,
    const std::function<void(std::size_t done, std::size_t total)>& progress = {}) {
  config.validate();
  std::vector<ResponseRecord> out(trials.size());
  std::atomic<std::size_t> next{0}, done{0};
  std::mutex progress_mu;
  auto worker = [&] {
    for (std::size_t i; (i = next++) < trials.size();) {
      const auto& t = trials[i];
      try {
        out[i] = query_llm(render_prompt(t, template_id, t.lang(), templates), config);
      } catch (const Error& e) {
        out[i].backend = llm_backend_name(config);
        out[i].error = e.what();
      }
      out[i].trial_id = t.trial_id;
      const auto d = ++done;
      if (progress) {
        std::lock_guard lock(progress_mu);
        progress(d, trials.size());
      }
    }
  };
  const auto width = std::min(config.parallelism, std::max<std::size_t>(trials.size(), 1));
  std::vector<std::thread> pool;
  for (std::size_t i = 0; i < width; ++i) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  return out;
}

}  // namespace probe

#endif  // PROBE_LLM_HPP
