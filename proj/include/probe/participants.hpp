#ifndef PROBE_PARTICIPANTS_HPP
#define PROBE_PARTICIPANTS_HPP

#include <array>
#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "probe/error.hpp"
#include "probe/io.hpp"
#include "probe/rng.hpp"
#include "probe/stats.hpp"
#include "probe/taskgen.hpp"
#include "probe/text.hpp"
#include "probe/tree.hpp"

namespace probe {

enum class BackendKind { llm, sim, human_import };

struct BackendConfig {
  BackendKind kind = BackendKind::sim;
  std::string endpoint_url;
  std::string model_name;
  double temperature = 0;
  int max_tokens = 200;
  std::chrono::milliseconds request_timeout{60000};
  int max_retries = 3;
  std::filesystem::path cache_dir;
  std::optional<std::string> agent_spec;
  std::size_t parallelism = 4;
  std::chrono::milliseconds backoff_base{500};

  void validate() const {
    if (temperature < 0) throw SpecError("temperature must be >= 0");
    if (max_tokens < 1) throw SpecError("max_tokens must be >= 1");
    if (max_retries < 0) throw SpecError("max_retries must be >= 0");
    if (parallelism < 1) throw SpecError("parallelism must be >= 1");
  }
};

struct ResponseRecord {
  std::string trial_id;
  std::string backend;
  std::string raw_text;
  double latency_ms = 0;
  bool cached = false;
  std::optional<std::string> timestamp;
  std::optional<std::string> fallback;  // sim agent that actually answered
  std::optional<std::string> error;     // transport/API failure text

  bool ok() const { return !error; }
};

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const auto t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline Json to_json(const ResponseRecord& r) {
  Json j;
  j["trial_id"] = r.trial_id;
  j["backend"] = r.backend;
  j["raw_text"] = r.raw_text;
  j["latency_ms"] = r.latency_ms;
  j["cached"] = r.cached;
  j["timestamp"] = r.timestamp ? Json(*r.timestamp) : Json(nullptr);
  if (r.fallback) j["fallback"] = *r.fallback;
  if (r.error) j["error"] = *r.error;
  return j;
}

inline ResponseRecord response_from_json(const Json& j) {
  ResponseRecord r;
  r.trial_id = j.at("trial_id").get<std::string>();
  r.backend = j.at("backend").get<std::string>();
  r.raw_text = j.at("raw_text").get<std::string>();
  r.latency_ms = j.value("latency_ms", 0.0);
  r.cached = j.value("cached", false);
  if (j.contains("timestamp") && !j["timestamp"].is_null())
    r.timestamp = j["timestamp"].get<std::string>();
  if (j.contains("fallback")) r.fallback = j["fallback"].get<std::string>();
  if (j.contains("error")) r.error = j["error"].get<std::string>();
  return r;
}

/// Throws DuplicateResponse if any (trial_id, backend) pair repeats.
inline void check_unique(const std::vector<ResponseRecord>& records) {
  std::set<std::pair<std::string, std::string>> seen;
  std::vector<std::string> dups;
  for (const auto& r : records)
    if (!seen.insert({r.trial_id, r.backend}).second) dups.push_back(r.trial_id);
  if (!dups.empty()) throw DuplicateResponse(dups);
}

inline std::vector<ResponseRecord> read_responses(const std::filesystem::path& path) {
  auto records = io::read_jsonl<ResponseRecord>(path, response_from_json);
  check_unique(records);
  return records;
}

inline std::string responses_to_jsonl(const std::vector<ResponseRecord>& records) {
  std::string out;
  for (const auto& r : records) out += to_json(r).dump() + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Simulated agents

enum class AgentRule { node, parent, random_span, tree_span, other };

inline const std::array<AgentRule, 5>& all_rules() {
  static const std::array<AgentRule, 5> r = {AgentRule::node, AgentRule::parent,
                                             AgentRule::random_span, AgentRule::tree_span,
                                             AgentRule::other};
  return r;
}

inline std::string to_string(AgentRule r) {
  switch (r) {
    case AgentRule::node: return "node";
    case AgentRule::parent: return "parent";
    case AgentRule::random_span: return "random-span";
    case AgentRule::tree_span: return "tree-span";
    case AgentRule::other: return "other";
  }
  return "?";
}

inline std::optional<AgentRule> parse_rule(std::string_view s) {
  for (auto r : all_rules())
    if (to_string(r) == s) return r;
  return std::nullopt;
}

struct AgentSpec {
  std::vector<std::pair<AgentRule, double>> weights;  // in all_rules() order, nonzero only

  bool is_pure() const { return weights.size() == 1; }

  /// "node" for a pure agent (including mix(node=1)), otherwise a
  /// normalized mix(...) string.
  std::string canonical() const {
    if (is_pure()) return to_string(weights.front().first);
    std::string out = "mix(";
    for (std::size_t i = 0; i < weights.size(); ++i) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.10g", weights[i].second);
      out += (i ? "," : "") + to_string(weights[i].first) + "=" + buf;
    }
    return out + ")";
  }
};

inline AgentSpec parse_agent_spec(const std::string& raw) {
  const auto s = text::trim(raw);
  if (auto r = parse_rule(s)) return {{{*r, 1.0}}};
  if (s.size() < 5 || s.rfind("mix(", 0) != 0 || s.back() != ')')
    throw SpecError("malformed agent spec '" + raw + "'");
  const auto body = s.substr(4, s.size() - 5);
  std::map<AgentRule, double> w;
  std::size_t pos = 0;
  while (pos <= body.size()) {
    auto comma = body.find(',', pos);
    if (comma == std::string::npos) comma = body.size();
    const auto item = text::trim(std::string_view(body).substr(pos, comma - pos));
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw SpecError("expected rule=weight in '" + raw + "'");
    const auto rule = parse_rule(text::trim(std::string_view(item).substr(0, eq)));
    if (!rule) throw SpecError("unknown rule '" + item.substr(0, eq) + "' in '" + raw + "'");
    if (w.count(*rule)) throw SpecError("rule listed twice in '" + raw + "'");
    const auto num = text::trim(std::string_view(item).substr(eq + 1));
    std::size_t used = 0;
    double p = 0;
    try {
      p = std::stod(num, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != num.size() || !(p >= 0) || p > 1)
      throw SpecError("bad weight '" + num + "' in '" + raw + "'");
    w[*rule] = p;
    pos = comma + 1;
  }
  double total = 0;
  for (const auto& [r, p] : w) total += p;
  if (std::abs(total - 1.0) > 1e-9) throw SpecError("weights in '" + raw + "' do not sum to 1");
  AgentSpec spec;
  for (auto r : all_rules())
    if (auto it = w.find(r); it != w.end() && it->second > 0) spec.weights.push_back(*it);
  return spec;
}

namespace detail {

inline std::vector<Span> distinct_spans(const std::vector<Span>& spans) {
  std::vector<Span> out;
  std::set<Span> seen;
  for (const auto& s : spans)
    if (seen.insert(s).second) out.push_back(s);
  return out;
}

inline std::vector<Span> rule_candidates(const Trial& trial, AgentRule rule) {
  std::vector<Span> out;
  for (const auto& r : collect_nodes(trial.test)) {
    if (!deletable(trial.test, r)) continue;
    if (rule == AgentRule::node && same_category(r.node->category, trial.demo.node_category))
      out.push_back(r.node->span);
    if (rule == AgentRule::parent &&
        same_category(r.parent->category, trial.demo.parent_category))
      out.push_back(r.node->span);
  }
  return distinct_spans(out);
}

inline std::vector<Span> tree_span_candidates(const ConstituencyTree& test) {
  const auto ref = collapse_unary(binarize(test));
  std::vector<Span> out;
  for (const auto& s : node_spans(ref))
    if (s != ref.root.span) out.push_back(s);
  return out;
}

inline std::string delete_span(const ConstituencyTree& test, const Span& s) {
  std::vector<std::string> rest(test.tokens.begin(), test.tokens.begin() + s.start);
  rest.insert(rest.end(), test.tokens.begin() + s.end, test.tokens.end());
  return text::detokenize(rest, test.lang);
}

}  // namespace detail

struct AgentAnswer {
  std::string text;
  AgentRule used;
  std::optional<Span> deleted;
};

/// One pure rule applied to a trial, with the node -> parent -> random-span
/// fallback when the rule has no candidate.
inline AgentAnswer apply_rule(const Trial& trial, AgentRule rule, std::uint64_t seed) {
  const auto& test = trial.test;
  if (rule == AgentRule::other) return {text::detokenize(test.tokens, test.lang), rule, {}};
  for (;;) {
    Rng rng = make_rng(seed, hash_tag(trial.trial_id), hash_tag(to_string(rule)));
    std::vector<Span> cands;
    if (rule == AgentRule::node || rule == AgentRule::parent)
      cands = detail::rule_candidates(trial, rule);
    else if (rule == AgentRule::tree_span)
      cands = detail::tree_span_candidates(test);
    else
      cands = {stats::random_span(test.size(), rng, false)};
    if (!cands.empty()) {
      const auto s = detail::pick(cands, rng);
      return {detail::delete_span(test, s), rule, s};
    }
    rule = rule == AgentRule::node ? AgentRule::parent : AgentRule::random_span;
  }
}

inline std::string sim_backend_name(const AgentSpec& spec) { return "sim:" + spec.canonical(); }

/// Deterministic in (trial_id, canonical spec, seed). The mixture draw
/// uses its own stream, so a component answers exactly as the pure agent
/// would for the same seed.
inline ResponseRecord sim_respond(const Trial& trial, const AgentSpec& spec, std::uint64_t seed) {
  AgentRule rule = spec.weights.front().first;
  if (!spec.is_pure()) {
    Rng mix = make_rng(seed, hash_tag(trial.trial_id), hash_tag("mix"));
    const double u = uniform01(mix);
    double acc = 0;
    rule = spec.weights.back().first;
    for (const auto& [r, p] : spec.weights) {
      acc += p;
      if (u < acc) {
        rule = r;
        break;
      }
    }
  }
  const auto answer = apply_rule(trial, rule, seed);
  ResponseRecord rec;
  rec.trial_id = trial.trial_id;
  rec.backend = sim_backend_name(spec);
  rec.raw_text = answer.text;
  if (answer.used != rule || !spec.is_pure()) rec.fallback = to_string(answer.used);
  return rec;
}

inline ResponseRecord sim_respond(const Trial& trial, const std::string& agent_spec,
                                  std::uint64_t seed) {
  return sim_respond(trial, parse_agent_spec(agent_spec), seed);
}

// ---------------------------------------------------------------------------
// Human session files
//
// One JSON object per line. The first line is the header
//   {"type":"session","session_id":...,"meta":{...},"assigned":[trial ids]}
// followed by one line per answer
//   {"type":"response","session_id":...,"trial_id":...,"text":...,"timestamp":...}

inline Json session_header_json(const std::string& session_id, const Json& meta,
                                const std::vector<std::string>& assigned) {
  Json j;
  j["type"] = "session";
  j["session_id"] = session_id;
  j["meta"] = meta.is_null() ? Json::object() : meta;
  j["assigned"] = assigned;
  return j;
}

inline Json session_response_json(const std::string& session_id, const std::string& trial_id,
                                  const std::string& text, const std::string& timestamp) {
  Json j;
  j["type"] = "response";
  j["session_id"] = session_id;
  j["trial_id"] = trial_id;
  j["text"] = text;
  j["timestamp"] = timestamp;
  return j;
}

inline std::string human_backend_name(const std::string& session_id) {
  return "human:" + session_id;
}

struct ImportReport {
  std::vector<ResponseRecord> records;
  std::vector<std::pair<std::string, std::string>> unanswered;  // (session, trial)
  std::vector<std::string> constant_answer_sessions;
};

/// Reads session files against the known trial ids. Schema problems name
/// the file and line.
inline ImportReport import_sessions(const std::vector<std::filesystem::path>& files,
                                    const std::set<std::string>& known_trials) {
  ImportReport report;
  std::vector<std::string> duplicates;
  for (const auto& path : files) {
    std::optional<std::string> session_id;
    std::vector<std::string> assigned;
    std::set<std::string> answered;
    std::vector<std::string> texts;
    io::for_each_line(path, [&](const std::string& line, std::size_t no) {
      const auto where = path.string() + ":" + std::to_string(no) + ": ";
      Json j;
      try {
        j = Json::parse(line);
      } catch (const Json::exception& e) {
        throw SchemaError(where + e.what());
      }
      auto str = [&](const char* key) {
        if (!j.is_object() || !j.contains(key) || !j[key].is_string())
          throw SchemaError(where + "missing string field '" + key + "'");
        return j[key].get<std::string>();
      };
      const auto type = str("type");
      const auto sid = str("session_id");
      if (type == "session") {
        if (session_id) throw SchemaError(where + "second session header");
        session_id = sid;
        if (j.contains("assigned")) {
          if (!j["assigned"].is_array()) throw SchemaError(where + "'assigned' must be a list");
          for (const auto& t : j["assigned"]) {
            if (!t.is_string()) throw SchemaError(where + "'assigned' must hold trial ids");
            const auto id = t.get<std::string>();
            if (!known_trials.count(id)) throw UnknownTrial(where + id);
            assigned.push_back(id);
          }
        }
        return;
      }
      if (type != "response") throw SchemaError(where + "unknown record type '" + type + "'");
      if (!session_id) session_id = sid;
      if (sid != *session_id) throw SchemaError(where + "session_id differs from header");
      const auto trial = str("trial_id");
      const auto text = str("text");
      if (!known_trials.count(trial)) throw UnknownTrial(where + trial);
      if (!answered.insert(trial).second) {
        duplicates.push_back(trial);
        return;
      }
      ResponseRecord r;
      r.trial_id = trial;
      r.backend = human_backend_name(sid);
      r.raw_text = text;
      if (j.contains("timestamp") && j["timestamp"].is_string())
        r.timestamp = j["timestamp"].get<std::string>();
      texts.push_back(text);
      report.records.push_back(std::move(r));
    });
    if (!session_id) throw SchemaError(path.string() + ": no session records");
    for (const auto& t : assigned)
      if (!answered.count(t)) report.unanswered.push_back({*session_id, t});
    if (texts.size() > 1 &&
        std::all_of(texts.begin(), texts.end(), [&](const auto& t) { return t == texts[0]; }))
      report.constant_answer_sessions.push_back(*session_id);
  }
  if (!duplicates.empty()) throw DuplicateResponse(duplicates);
  check_unique(report.records);
  return report;
}

}  // namespace probe

#endif  // PROBE_PARTICIPANTS_HPP
