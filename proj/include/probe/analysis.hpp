#ifndef PROBE_ANALYSIS_HPP
#define PROBE_ANALYSIS_HPP

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "probe/io.hpp"
#include "probe/taskgen.hpp"
#include "probe/text.hpp"
#include "probe/tree.hpp"

namespace probe {

enum class DeletionKind { single_gap, multi_gap, no_deletion, addition, empty };

inline std::string to_string(DeletionKind k) {
  switch (k) {
    case DeletionKind::single_gap: return "single_gap";
    case DeletionKind::multi_gap: return "multi_gap";
    case DeletionKind::no_deletion: return "no_deletion";
    case DeletionKind::addition: return "addition";
    default: return "empty";
  }
}

inline DeletionKind parse_deletion_kind(const std::string& s) {
  for (auto k : {DeletionKind::single_gap, DeletionKind::multi_gap, DeletionKind::no_deletion,
                 DeletionKind::addition, DeletionKind::empty})
    if (to_string(k) == s) return k;
  throw SchemaError("unknown deletion kind '" + s + "'");
}

struct DeletionResult {
  DeletionKind kind = DeletionKind::empty;
  std::vector<Span> gaps;  // one span for single_gap, two or more for multi_gap
  std::vector<std::string> normalized_response_tokens;

  std::optional<Span> span() const {
    return kind == DeletionKind::single_gap ? std::optional<Span>(gaps.front()) : std::nullopt;
  }
};

namespace detail {

inline bool clitic_suffix(const std::string& tok, std::size_t at) {
  static const std::vector<std::string> suffixes = {"'s", "'re", "'ll", "'ve", "'m", "'d"};
  const auto rest = tok.substr(at);
  return std::find(suffixes.begin(), suffixes.end(), text::ascii_lower(rest)) != suffixes.end();
}

// Mirrors the treebank convention of splitting "don't" -> "do n't" and
// "John's" -> "John 's".
inline void push_english_token(std::string tok, std::vector<std::string>& out) {
  auto chars = text::utf8_chars(tok);
  while (!chars.empty() && text::is_punct(chars.back()) && chars.back() != "'") chars.pop_back();
  while (!chars.empty() && text::is_punct(chars.front()) && chars.front() != "'")
    chars.erase(chars.begin());
  tok.clear();
  for (auto& c : chars) tok += c;
  if (tok.empty()) return;
  const auto lower = text::ascii_lower(tok);
  if (lower.size() > 3 && lower.compare(lower.size() - 3, 3, "n't") == 0) {
    out.push_back(lower.substr(0, lower.size() - 3));
    out.push_back("n't");
    return;
  }
  if (const auto q = lower.rfind('\''); q != std::string::npos && q > 0 && clitic_suffix(lower, q)) {
    out.push_back(lower.substr(0, q));
    out.push_back(lower.substr(q));
    return;
  }
  out.push_back(lower);
}

}  // namespace detail

/// Case-folded comparison form of a token sequence.
inline std::vector<std::string> normalize_tokens(const std::vector<std::string>& tokens,
                                                 Lang lang) {
  if (lang == Lang::zh) return tokens;
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(text::ascii_lower(t));
  return out;
}

/// Reduces a free-text response to comparison tokens: the quoted answer is
/// taken if one is present, surrounding quotes and terminal punctuation are
/// stripped, and English is case-folded.
inline std::vector<std::string> normalize_response(const std::string& response, Lang lang) {
  std::string body = text::last_quoted_segment(response).value_or(response);
  body = text::strip_decoration(body);
  std::vector<std::string> out;
  if (lang == Lang::zh) {
    for (auto& ch : text::utf8_chars(body))
      if (!text::is_space(ch) && !text::is_punct(ch)) out.push_back(std::move(ch));
    return out;
  }
  for (auto& tok : text::tokenize(body, Lang::en)) detail::push_english_token(std::move(tok), out);
  return out;
}

/// Aligns the response against the original sentence. A single removed
/// span is located by the longest common prefix that still allows the
/// rest of the response to match the original's suffix.
inline DeletionResult extract_deletion(const std::vector<std::string>& original_tokens,
                                       const std::string& response_text, Lang lang) {
  DeletionResult r;
  r.normalized_response_tokens = normalize_response(response_text, lang);
  const auto orig = normalize_tokens(original_tokens, lang);
  const auto& resp = r.normalized_response_tokens;
  const std::size_t n = orig.size(), m = resp.size();
  if (m == 0) return r.kind = DeletionKind::empty, r;
  if (resp == orig) return r.kind = DeletionKind::no_deletion, r;
  if (m < n) {
    std::size_t prefix = 0;
    while (prefix < m && orig[prefix] == resp[prefix]) ++prefix;
    for (std::size_t p = prefix + 1; p-- > 0;) {
      if (std::equal(resp.begin() + static_cast<std::ptrdiff_t>(p), resp.end(),
                     orig.end() - static_cast<std::ptrdiff_t>(m - p))) {
        r.kind = DeletionKind::single_gap;
        r.gaps = {Span{static_cast<int>(p), static_cast<int>(p + n - m)}};
        return r;
      }
    }
    // Greedy leftmost subsequence match; every unmatched run is a gap.
    std::size_t j = 0;
    std::vector<bool> kept(n, false);
    for (std::size_t i = 0; i < n && j < m; ++i)
      if (orig[i] == resp[j]) kept[i] = true, ++j;
    if (j == m) {
      for (std::size_t i = 0; i < n;) {
        if (kept[i]) { ++i; continue; }
        std::size_t e = i;
        while (e < n && !kept[e]) ++e;
        r.gaps.push_back({static_cast<int>(i), static_cast<int>(e)});
        i = e;
      }
      r.kind = DeletionKind::multi_gap;
      return r;
    }
  }
  r.kind = DeletionKind::addition;
  return r;
}

enum class DeletionClass { constituent, nonconstituent, other };

inline std::string to_string(DeletionClass c) {
  switch (c) {
    case DeletionClass::constituent: return "constituent";
    case DeletionClass::nonconstituent: return "nonconstituent";
    default: return "other";
  }
}

inline DeletionClass parse_deletion_class(const std::string& s) {
  if (s == "constituent") return DeletionClass::constituent;
  if (s == "nonconstituent") return DeletionClass::nonconstituent;
  if (s == "other") return DeletionClass::other;
  throw SchemaError("unknown class '" + s + "'");
}

struct ClassifiedDeletion {
  std::string trial_id;
  std::string backend;
  DeletionClass cls = DeletionClass::other;
  DeletionKind kind = DeletionKind::empty;
  std::optional<Span> span;   // the single deleted span, when there is one
  std::vector<Span> gaps;     // all deleted spans (multi_gap)
  std::vector<ConstituentInfo> nodes;  // nodes at `span`, topmost first

  std::optional<std::string> node_category() const {
    return nodes.empty() ? std::nullopt : std::optional<std::string>(nodes.front().category);
  }
  std::optional<std::string> parent_category() const {
    return nodes.empty() ? std::nullopt : nodes.front().parent_category;
  }
};

/// Single-gap spans that are nodes of the (unbinarized) test tree are
/// constituents; other single gaps and all multi-gap deletions are
/// nonconstituents; everything else is "other".
inline ClassifiedDeletion classify(const DeletionResult& result, const ConstituencyTree& test_tree) {
  ClassifiedDeletion c;
  c.kind = result.kind;
  switch (result.kind) {
    case DeletionKind::single_gap:
      c.span = result.gaps.front();
      c.gaps = result.gaps;
      c.nodes = nodes_at(test_tree, *c.span);
      c.cls = c.nodes.empty() ? DeletionClass::nonconstituent : DeletionClass::constituent;
      break;
    case DeletionKind::multi_gap:
      c.gaps = result.gaps;
      c.cls = DeletionClass::nonconstituent;
      break;
    default:
      c.cls = DeletionClass::other;
  }
  return c;
}

inline Json to_json(const ClassifiedDeletion& c) {
  Json j;
  j["trial_id"] = c.trial_id;
  j["backend"] = c.backend;
  j["class"] = to_string(c.cls);
  j["span"] = c.span ? span_json(*c.span) : Json(nullptr);
  j["node_cat"] = c.node_category() ? Json(*c.node_category()) : Json(nullptr);
  j["parent_cat"] = c.parent_category() ? Json(*c.parent_category()) : Json(nullptr);
  j["kind"] = to_string(c.kind);
  Json gaps = Json::array();
  for (const auto& g : c.gaps) gaps.push_back(span_json(g));
  j["gaps"] = gaps;
  Json chain = Json::array();
  for (const auto& n : c.nodes)
    chain.push_back(Json::array({n.category, n.parent_category ? Json(*n.parent_category)
                                                               : Json(nullptr)}));
  j["chain"] = chain;
  return j;
}

inline ClassifiedDeletion classified_from_json(const Json& j) {
  ClassifiedDeletion c;
  c.trial_id = j.at("trial_id").get<std::string>();
  c.backend = j.value("backend", std::string());
  c.cls = parse_deletion_class(j.at("class").get<std::string>());
  c.kind = parse_deletion_kind(j.at("kind").get<std::string>());
  if (!j.at("span").is_null()) c.span = Span{j["span"][0].get<int>(), j["span"][1].get<int>()};
  if (j.contains("gaps"))
    for (const auto& g : j["gaps"]) c.gaps.push_back({g[0].get<int>(), g[1].get<int>()});
  if (j.contains("chain")) {
    for (const auto& n : j["chain"])
      c.nodes.push_back({c.span.value_or(Span{}), n[0].get<std::string>(),
                         n[1].is_null() ? std::nullopt
                                        : std::optional<std::string>(n[1].get<std::string>())});
  } else if (!j.at("node_cat").is_null()) {
    c.nodes.push_back({c.span.value_or(Span{}), j["node_cat"].get<std::string>(),
                       j.at("parent_cat").is_null()
                           ? std::nullopt
                           : std::optional<std::string>(j["parent_cat"].get<std::string>())});
  }
  if (c.cls == DeletionClass::constituent && (!c.span || c.nodes.empty()))
    throw SchemaError("constituent record without span for " + c.trial_id);
  return c;
}

inline std::vector<ClassifiedDeletion> read_classified(const std::filesystem::path& path) {
  return io::read_jsonl<ClassifiedDeletion>(path, classified_from_json);
}

// ---------------------------------------------------------------------------
// Metrics

/// Constituent deletions over all tests, "other" included.
inline double constituent_rate(const std::vector<ClassifiedDeletion>& group) {
  if (group.empty()) throw EmptyGroup("constituent rate of an empty group");
  const auto k = std::count_if(group.begin(), group.end(), [](const auto& c) {
    return c.cls == DeletionClass::constituent;
  });
  return static_cast<double>(k) / static_cast<double>(group.size());
}

inline bool matches_node_rule(const ClassifiedDeletion& c, const Demonstration& demo) {
  return std::any_of(c.nodes.begin(), c.nodes.end(), [&](const ConstituentInfo& n) {
    return same_category(n.category, demo.node_category);
  });
}

inline bool matches_parent_rule(const ClassifiedDeletion& c, const Demonstration& demo) {
  return std::any_of(c.nodes.begin(), c.nodes.end(), [&](const ConstituentInfo& n) {
    return n.parent_category && same_category(*n.parent_category, demo.parent_category);
  });
}

struct RuleRatios {
  double node_ratio = 0;
  double parent_ratio = 0;
  std::size_t n_constituent = 0;
};

/// Rule explained ratios over the constituent-class tests of one group.
/// Unary chains count as a match if any node on the deleted span matches.
inline RuleRatios rule_explained_ratios(
    const std::vector<std::pair<const Trial*, const ClassifiedDeletion*>>& group) {
  RuleRatios r;
  std::size_t node = 0, parent = 0;
  for (const auto& [trial, c] : group) {
    if (c->cls != DeletionClass::constituent) continue;
    ++r.n_constituent;
    node += matches_node_rule(*c, trial->demo);
    parent += matches_parent_rule(*c, trial->demo);
  }
  if (r.n_constituent == 0) throw NoConstituentTests("no constituent deletions in group");
  r.node_ratio = static_cast<double>(node) / static_cast<double>(r.n_constituent);
  r.parent_ratio = static_cast<double>(parent) / static_cast<double>(r.n_constituent);
  return r;
}

inline const std::vector<std::string>& exp4_conditions() {
  static const std::vector<std::string> c = {"adjunct-1", "adjunct-2", "pp-1", "pp-2"};
  return c;
}

/// Per condition: fraction of tests whose single deleted span is exactly
/// the target span.
inline std::map<std::string, double> target_string_rates(
    const std::vector<std::pair<const Trial*, const ClassifiedDeletion*>>& group) {
  std::map<std::string, std::pair<std::size_t, std::size_t>> tally;  // hits, total
  for (const auto& [trial, c] : group) {
    if (!trial->condition) continue;
    if (!trial->target_span) throw MissingTargetSpan(trial->trial_id);
    auto& [hits, total] = tally[*trial->condition];
    ++total;
    hits += c->kind == DeletionKind::single_gap && c->span == trial->target_span;
  }
  std::map<std::string, double> out;
  for (const auto& [cond, t] : tally)
    out[cond] = static_cast<double>(t.first) / static_cast<double>(t.second);
  return out;
}

struct RunMetrics {
  std::string backend;
  int run_id = 0;
  std::string experiment;
  std::size_t n_tests = 0;
  double constituent_rate = 0;
  double nonconstituent_rate = 0;
  double other_rate = 0;
  std::size_t multi_gap = 0;
  std::size_t empty = 0;
  std::optional<double> node_ratio, parent_ratio;
  std::optional<double> node_ratio_dissociation, parent_ratio_dissociation;
  std::map<std::string, double> condition_rates;
};

using TrialIndex = std::map<std::string, const Trial*>;

inline TrialIndex index_trials(const std::vector<Trial>& trials) {
  TrialIndex idx;
  for (const auto& t : trials) idx[t.trial_id] = &t;
  return idx;
}

inline const Trial& lookup_trial(const TrialIndex& idx, const std::string& id) {
  auto it = idx.find(id);
  if (it == idx.end()) throw UnknownTrial(id);
  return *it->second;
}

inline bool is_dissociation_trial(const Trial& t) {
  return t.flags.np_is_indirect_descendant || t.flags.node_parent_split;
}

/// Per-(backend, run) metrics, ordered by backend then run id.
inline std::vector<RunMetrics> analyze(const std::vector<Trial>& trials,
                                       const std::vector<ClassifiedDeletion>& classified) {
  const auto idx = index_trials(trials);
  using Group = std::vector<std::pair<const Trial*, const ClassifiedDeletion*>>;
  std::map<std::pair<std::string, int>, Group> groups;
  for (const auto& c : classified) {
    const auto& t = lookup_trial(idx, c.trial_id);
    groups[{c.backend, t.run_id}].push_back({&t, &c});
  }
  std::vector<RunMetrics> out;
  for (const auto& [key, group] : groups) {
    RunMetrics m;
    m.backend = key.first;
    m.run_id = key.second;
    m.experiment = to_string(group.front().first->experiment);
    m.n_tests = group.size();
    std::vector<ClassifiedDeletion> cs;
    Group dissociation;
    for (const auto& [t, c] : group) {
      cs.push_back(*c);
      m.multi_gap += c->kind == DeletionKind::multi_gap;
      m.empty += c->kind == DeletionKind::empty;
      if (is_dissociation_trial(*t)) dissociation.push_back({t, c});
    }
    const auto count = [&](DeletionClass k) {
      return static_cast<double>(std::count_if(cs.begin(), cs.end(),
                                               [&](const auto& c) { return c.cls == k; })) /
             static_cast<double>(cs.size());
    };
    m.constituent_rate = constituent_rate(cs);
    m.nonconstituent_rate = count(DeletionClass::nonconstituent);
    m.other_rate = count(DeletionClass::other);
    try {
      const auto r = rule_explained_ratios(group);
      m.node_ratio = r.node_ratio;
      m.parent_ratio = r.parent_ratio;
    } catch (const NoConstituentTests&) {
    }
    try {
      const auto r = rule_explained_ratios(dissociation);
      m.node_ratio_dissociation = r.node_ratio;
      m.parent_ratio_dissociation = r.parent_ratio;
    } catch (const NoConstituentTests&) {
    }
    m.condition_rates = target_string_rates(group);
    out.push_back(std::move(m));
  }
  return out;
}

inline std::string metrics_to_csv(const std::vector<RunMetrics>& rows) {
  auto opt = [](const std::optional<double>& v) { return v ? io::fmt_double(*v) : std::string(); };
  std::string out =
      "run_id,backend,experiment,n_tests,constituent_rate,nonconstituent_rate,other_rate,"
      "multi_gap,empty,node_ratio,parent_ratio,node_ratio_dissociation,"
      "parent_ratio_dissociation";
  for (const auto& c : exp4_conditions()) out += "," + c;
  out += "\n";
  for (const auto& m : rows) {
    out += std::to_string(m.run_id) + "," + m.backend + "," + m.experiment + "," +
           std::to_string(m.n_tests) + "," + io::fmt_double(m.constituent_rate) + "," +
           io::fmt_double(m.nonconstituent_rate) + "," + io::fmt_double(m.other_rate) + "," +
           std::to_string(m.multi_gap) + "," + std::to_string(m.empty) + "," +
           opt(m.node_ratio) + "," + opt(m.parent_ratio) + "," +
           opt(m.node_ratio_dissociation) + "," + opt(m.parent_ratio_dissociation);
    for (const auto& c : exp4_conditions()) {
      auto it = m.condition_rates.find(c);
      out += "," + (it == m.condition_rates.end() ? std::string() : io::fmt_double(it->second));
    }
    out += "\n";
  }
  return out;
}

}  // namespace probe

#endif  // PROBE_ANALYSIS_HPP
