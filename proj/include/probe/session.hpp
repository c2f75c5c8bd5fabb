#ifndef PROBE_SESSION_HPP
#define PROBE_SESSION_HPP

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <httplib.h>

#include "probe/analysis.hpp"
#include "probe/io.hpp"
#include "probe/participants.hpp"
#include "probe/prompt.hpp"
#include "probe/rng.hpp"

namespace probe {

struct SessionResponse {
  std::string trial_id;
  std::string text;
  std::string timestamp;
};

// One participant's pass through their assigned trials.
struct Session {
  std::string session_id;
  Json meta = Json::object();
  std::vector<std::string> assigned;
  std::vector<SessionResponse> responses;  // responses[i] answers assigned[i]
  std::mutex mu;

  std::size_t cursor() const { return responses.size(); }
  bool done() const { return cursor() >= assigned.size(); }

  std::string to_jsonl() const {
    std::string out = session_header_json(session_id, meta, assigned).dump() + "\n";
    for (const auto& r : responses)
      out += session_response_json(session_id, r.trial_id, r.text, r.timestamp).dump() + "\n";
    return out;
  }
};

struct SessionServiceConfig {
  std::filesystem::path dir;  // one <session_id>.jsonl per session
  std::uint64_t seed = 0;
  std::string template_id = "session";
  std::size_t trials_per_session = 0;  // 0: a whole run
  std::string cors_origin = "*";
};

/// Session state plus the HTTP routes over it. Sessions are persisted
/// after every accepted response and reloaded on construction.
class SessionService {
 public:
  SessionService(std::vector<Trial> trials, SessionServiceConfig config,
                 TemplateSet templates = TemplateSet::builtin())
      : trials_(std::move(trials)), config_(std::move(config)), templates_(std::move(templates)) {
    if (trials_.empty()) throw EmptyPool("no trials to serve");
    for (const auto& t : trials_) {
      index_[t.trial_id] = &t;
      runs_[t.run_id].push_back(t.trial_id);
    }
    std::filesystem::create_directories(config_.dir);
    load_existing();
  }

  SessionService(const SessionService&) = delete;
  SessionService& operator=(const SessionService&) = delete;

  /// Creates a session over the next run (round robin), shuffled by a
  /// stream derived from the seed and the session id.
  std::string create(const Json& meta) {
    auto s = std::make_shared<Session>();
    std::lock_guard lock(mu_);
    do s->session_id = new_id();
    while (sessions_.count(s->session_id));
    s->meta = meta.is_object() ? meta : Json::object();
    auto it = runs_.begin();
    std::advance(it, static_cast<long>(created_ % runs_.size()));
    ++created_;
    s->assigned = it->second;
    Rng rng = make_rng(config_.seed, hash_tag(s->session_id));
    shuffle(s->assigned, rng);
    if (config_.trials_per_session && s->assigned.size() > config_.trials_per_session)
      s->assigned.resize(config_.trials_per_session);
    persist(*s);
    sessions_[s->session_id] = s;
    return s->session_id;
  }

  std::shared_ptr<Session> find(const std::string& id) const {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
  }

  std::size_t session_count() const {
    std::lock_guard lock(mu_);
    return sessions_.size();
  }

  void register_routes(httplib::Server& server) {
    server.set_default_headers({{"Access-Control-Allow-Origin", config_.cors_origin},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                                {"Access-Control-Allow-Headers", "Content-Type"}});
    server.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) {
      res.status = 204;
    });

    server.Post("/api/session", [this](const httplib::Request& req, httplib::Response& res) {
      Json meta = Json::object();
      if (!req.body.empty()) {
        Json body;
        if (!parse_body(req, res, body)) return;
        if (body.contains("meta")) meta = body["meta"];
      }
      const auto id = create(meta);
      const auto s = find(id);
      reply(res, 201, {{"session_id", id}, {"total", s->assigned.size()}});
    });

    server.Get(R"(/api/session/([^/]+)/next)",
               [this](const httplib::Request& req, httplib::Response& res) {
                 const auto s = find(req.matches[1]);
                 if (!s) return not_found(res);
                 std::lock_guard lock(s->mu);
                 if (s->done()) {
                   reply(res, 200, {{"done", true}, {"total", s->assigned.size()}});
                   return;
                 }
                 const auto& trial = *index_.at(s->assigned[s->cursor()]);
                 reply(res, 200,
                       {{"trial_id", trial.trial_id},
                        {"instruction_text",
                         render_prompt(trial, config_.template_id, trial.lang(), templates_)},
                        {"done", false},
                        {"index", s->cursor()},
                        {"total", s->assigned.size()}});
               });

    server.Post(R"(/api/session/([^/]+)/response)",
                [this](const httplib::Request& req, httplib::Response& res) {
                  const auto s = find(req.matches[1]);
                  if (!s) return not_found(res);
                  Json body;
                  if (!parse_body(req, res, body)) return;
                  if (!body.contains("trial_id") || !body["trial_id"].is_string() ||
                      (body.contains("text") && !body["text"].is_string()))
                    return reply(res, 400, {{"error", "expected {trial_id, text} strings"}});
                  const auto trial_id = body["trial_id"].get<std::string>();
                  const auto text = body.value("text", std::string());
                  std::lock_guard lock(s->mu);
                  if (s->done() || s->assigned[s->cursor()] != trial_id)
                    return reply(res, 409, {{"error", "not the current trial"}});
                  if (text::trim(text).empty())
                    return reply(res, 422, {{"error", "empty response text"}});
                  s->responses.push_back({trial_id, text, utc_timestamp()});
                  try {
                    persist(*s);
                  } catch (...) {
                    s->responses.pop_back();
                    throw;
                  }
                  reply(res, 200, {{"accepted", true}, {"done", s->done()}});
                });

    server.Get(R"(/api/session/([^/]+)/export)",
               [this](const httplib::Request& req, httplib::Response& res) {
                 const auto s = find(req.matches[1]);
                 if (!s) return not_found(res);
                 std::lock_guard lock(s->mu);
                 res.status = 200;
                 res.set_content(s->to_jsonl(), "application/x-ndjson");
               });

    server.set_exception_handler(
        [](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
          std::string what = "internal error";
          try {
            std::rethrow_exception(ep);
          } catch (const std::exception& e) {
            what = e.what();
          } catch (...) {
          }
          reply(res, 500, {{"error", what}});
        });
  }

 private:
  static void reply(httplib::Response& res, int status, const Json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json; charset=utf-8");
  }

  static void not_found(httplib::Response& res) {
    reply(res, 404, {{"error", "unknown session"}});
  }

  static bool parse_body(const httplib::Request& req, httplib::Response& res, Json& out) {
    try {
      out = Json::parse(req.body);
    } catch (const Json::exception&) {
      reply(res, 400, {{"error", "body is not valid JSON"}});
      return false;
    }
    if (!out.is_object()) {
      reply(res, 400, {{"error", "body must be a JSON object"}});
      return false;
    }
    return true;
  }

  std::string new_id() {
    static constexpr char digits[] = "0123456789abcdef";
    std::string id;
    for (int i = 0; i < 16; ++i) id += digits[uniform_index(id_rng_, 16)];
    return id;
  }

  std::filesystem::path file_for(const std::string& id) const {
    return config_.dir / (id + ".jsonl");
  }

  void persist(const Session& s) const { io::write_file_atomic(file_for(s.session_id), s.to_jsonl()); }

  void load_existing() {
    std::set<std::string> known;
    for (const auto& t : trials_) known.insert(t.trial_id);
    for (const auto& entry : std::filesystem::directory_iterator(config_.dir)) {
      if (entry.path().extension() != ".jsonl") continue;
      auto s = std::make_shared<Session>();
      io::for_each_line(entry.path(), [&](const std::string& line, std::size_t no) {
        const auto j = Json::parse(line);
        const auto type = j.at("type").get<std::string>();
        if (type == "session") {
          s->session_id = j.at("session_id").get<std::string>();
          s->meta = j.value("meta", Json::object());
          s->assigned = j.at("assigned").get<std::vector<std::string>>();
          for (const auto& id : s->assigned)
            if (!known.count(id))
              throw UnknownTrial(entry.path().string() + ":" + std::to_string(no) + ": " + id);
        } else {
          s->responses.push_back({j.at("trial_id").get<std::string>(),
                                  j.at("text").get<std::string>(),
                                  j.value("timestamp", std::string())});
        }
      });
      if (s->session_id.empty()) throw SchemaError(entry.path().string() + ": no header");
      if (s->responses.size() > s->assigned.size())
        throw SchemaError(entry.path().string() + ": more responses than trials");
      for (std::size_t i = 0; i < s->responses.size(); ++i)
        if (s->responses[i].trial_id != s->assigned[i])
          throw SchemaError(entry.path().string() + ": responses out of order");
      sessions_[s->session_id] = s;
      ++created_;
    }
  }

  std::vector<Trial> trials_;
  SessionServiceConfig config_;
  TemplateSet templates_;
  std::map<std::string, const Trial*> index_;
  std::map<int, std::vector<std::string>> runs_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::size_t created_ = 0;
  Rng id_rng_{std::random_device{}()};
};

}  // namespace probe

#endif  // PROBE_SESSION_HPP
