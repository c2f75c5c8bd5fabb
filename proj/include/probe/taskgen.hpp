#ifndef PROBE_TASKGEN_HPP
#define PROBE_TASKGEN_HPP

#include <algorithm>
#include <array>
#include <functional>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "probe/bank.hpp"
#include "probe/io.hpp"
#include "probe/rng.hpp"
#include "probe/tree.hpp"

namespace probe {

enum class Experiment { e1a, e1b, e2, e3, e4 };

inline std::string to_string(Experiment e) {
  switch (e) {
    case Experiment::e1a: return "1a";
    case Experiment::e1b: return "1b";
    case Experiment::e2: return "2";
    case Experiment::e3: return "3";
    default: return "4";
  }
}

inline Experiment parse_experiment(const std::string& s) {
  if (s == "1a") return Experiment::e1a;
  if (s == "1b") return Experiment::e1b;
  if (s == "2") return Experiment::e2;
  if (s == "3") return Experiment::e3;
  if (s == "4") return Experiment::e4;
  throw FormatError("unknown experiment '" + s + "'");
}

struct Demonstration {
  std::string sentence_id;
  Lang lang = Lang::en;
  std::vector<std::string> tokens;
  Span deleted_span;
  std::string node_category;
  std::string parent_category;

  std::vector<std::string> remainder() const {
    std::vector<std::string> out(tokens.begin(), tokens.begin() + deleted_span.start);
    out.insert(out.end(), tokens.begin() + deleted_span.end, tokens.end());
    return out;
  }
};

struct TrialFlags {
  bool np_is_indirect_descendant = false;
  bool node_parent_split = false;
};

struct Trial {
  std::string trial_id;
  int run_id = 0;
  Experiment experiment = Experiment::e1a;
  Demonstration demo;
  ConstituencyTree test;  // test.sentence_id, test.tokens
  TrialFlags flags;
  std::optional<std::string> condition;
  std::optional<Span> target_span;

  Lang lang() const { return test.lang; }
};

// ---------------------------------------------------------------------------
// Node enumeration with ancestry

struct NodeRef {
  const Node* node;
  const Node* parent;
  std::vector<const Node*> ancestors;  // root first, parent last
};

inline std::vector<NodeRef> collect_nodes(const ConstituencyTree& tree) {
  std::vector<NodeRef> out;
  std::vector<const Node*> path;
  std::function<void(const Node&)> walk = [&](const Node& n) {
    out.push_back({&n, path.empty() ? nullptr : path.back(), path});
    path.push_back(&n);
    for (const auto& c : n.children) walk(c);
    path.pop_back();
  };
  walk(tree.root);
  return out;
}

// A node whose removal leaves at least one token.
inline bool deletable(const ConstituencyTree& tree, const NodeRef& r) {
  return r.parent != nullptr && r.node->span != tree.root.span;
}

inline Demonstration make_demo(const ConstituencyTree& tree, const NodeRef& r) {
  return {tree.sentence_id, tree.lang, tree.tokens, r.node->span, r.node->category,
          r.parent ? r.parent->category : std::string()};
}

namespace detail {

inline std::string trial_id(Experiment e, int run, std::size_t idx) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s-r%04d-t%03zu", to_string(e).c_str(), run, idx);
  return buf;
}

inline bool is_np(const Node& n) { return base_category(n.category) == "NP"; }
inline bool is_vp(const Node& n) { return base_category(n.category) == "VP"; }
inline bool is_clause(const Node& n) {
  const auto c = base_category(n.category);
  return c == "S" || c == "IP";
}

inline std::vector<std::string> child_categories(const Node& n) {
  std::vector<std::string> out;
  for (const auto& c : n.children) out.emplace_back(base_category(c.category));
  return out;
}

template <typename T>
const T& pick(const std::vector<T>& v, Rng& rng) {
  return v[static_cast<std::size_t>(uniform_index(rng, v.size()))];
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Experiment 1

enum class Exp1Variant { a, b };

/// NPs of at least two tokens that are a direct child of a VP.
inline std::vector<NodeRef> exp1_demo_candidates(const ConstituencyTree& tree,
                                                 Exp1Variant variant) {
  std::vector<NodeRef> out;
  if (variant == Exp1Variant::b) {
    // [S [NP] [VP [NP]]]: the object NP is the one deleted.
    const auto& root = tree.root;
    if (!detail::is_clause(root) ||
        detail::child_categories(root) != std::vector<std::string>{"NP", "VP"})
      return out;
    for (const auto& r : collect_nodes(tree))
      if (r.parent == &root.children[1] && detail::is_np(*r.node)) out.push_back(r);
    return out;
  }
  for (const auto& r : collect_nodes(tree))
    if (detail::is_np(*r.node) && r.node->span.length() >= 2 && r.parent &&
        detail::is_vp(*r.parent) && deletable(tree, r))
      out.push_back(r);
  return out;
}

struct Exp1TestInfo {
  bool qualifies = false;
  bool indirect_only = false;  // some NP is below a VP, none directly under one
};

inline Exp1TestInfo exp1_test_info(const ConstituencyTree& tree, Exp1Variant variant) {
  Exp1TestInfo info;
  if (variant == Exp1Variant::b) {
    // [S [NP] [VP [PP [NP]]]]
    const auto& root = tree.root;
    if (!detail::is_clause(root) ||
        detail::child_categories(root) != std::vector<std::string>{"NP", "VP"})
      return info;
    for (const auto& pp : root.children[1].children) {
      if (base_category(pp.category) != "PP") continue;
      for (const auto& np : pp.children)
        if (detail::is_np(np)) info.qualifies = info.indirect_only = true;
    }
    return info;
  }
  bool direct = false, below = false;
  for (const auto& r : collect_nodes(tree)) {
    if (!detail::is_np(*r.node) || r.node->span.length() < 2 || !deletable(tree, r)) continue;
    const bool has_vp = std::any_of(r.ancestors.begin(), r.ancestors.end(),
                                    [](const Node* a) { return detail::is_vp(*a); });
    if (!has_vp) continue;
    below = true;
    if (detail::is_vp(*r.parent)) direct = true;
  }
  info.qualifies = below;
  info.indirect_only = below && !direct;
  return info;
}

/// One run of Experiment 1: demonstrations and test sentences are each
/// sampled uniformly without replacement, then paired in order.
inline std::vector<Trial> gen_exp1(const SentenceBank& bank, std::size_t n_trials,
                                   std::uint64_t seed, Exp1Variant variant, int run_id = 0) {
  const auto exp = variant == Exp1Variant::a ? Experiment::e1a : Experiment::e1b;
  std::vector<std::size_t> demos, tests;
  for (std::size_t i = 0; i < bank.size(); ++i) {
    if (!exp1_demo_candidates(bank.entries[i].tree, variant).empty()) demos.push_back(i);
    if (exp1_test_info(bank.entries[i].tree, variant).qualifies) tests.push_back(i);
  }
  if (demos.empty()) throw EmptyPool("no sentence has an NP directly under a VP");
  if (tests.empty()) throw EmptyPool("no sentence has an NP below a VP");
  if (demos.size() < n_trials || tests.size() < n_trials)
    throw InsufficientPool("need " + std::to_string(n_trials) + " trials; have " +
                           std::to_string(demos.size()) + " demos and " +
                           std::to_string(tests.size()) + " tests");

  Rng rng = make_rng(seed, hash_tag("exp1"), static_cast<std::uint64_t>(run_id));
  shuffle(demos, rng);
  shuffle(tests, rng);
  std::vector<bool> used(tests.size(), false);
  std::vector<Trial> out;
  for (std::size_t i = 0; i < n_trials; ++i) {
    const auto& demo_tree = bank.entries[demos[i]].tree;
    std::optional<std::size_t> chosen;
    for (std::size_t k = 0; k < tests.size() && !chosen; ++k)
      if (!used[k] && bank.entries[tests[k]].sentence_id != demo_tree.sentence_id) chosen = k;
    if (!chosen) throw InsufficientPool("test pool exhausted while pairing");
    used[*chosen] = true;
    const auto& test_tree = bank.entries[tests[*chosen]].tree;
    const auto cands = exp1_demo_candidates(demo_tree, variant);
    Trial t;
    t.trial_id = detail::trial_id(exp, run_id, i);
    t.run_id = run_id;
    t.experiment = exp;
    t.demo = make_demo(demo_tree, detail::pick(cands, rng));
    t.test = test_tree;
    t.flags.np_is_indirect_descendant = exp1_test_info(test_tree, variant).indirect_only;
    out.push_back(std::move(t));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Experiment 2

struct Exp2TestInfo {
  bool has_node = false;
  bool has_parent = false;
  bool has_both = false;  // one constituent satisfies both
  bool qualifies() const { return has_node && has_parent; }
  bool split() const { return qualifies() && !has_both; }
};

inline Exp2TestInfo exp2_test_info(const ConstituencyTree& tree, std::string_view node_cat,
                                   std::string_view parent_cat) {
  Exp2TestInfo info;
  for (const auto& r : collect_nodes(tree)) {
    if (!deletable(tree, r)) continue;
    const bool n = same_category(r.node->category, node_cat);
    const bool p = same_category(r.parent->category, parent_cat);
    info.has_node |= n;
    info.has_parent |= p;
    info.has_both |= n && p;
  }
  return info;
}

inline std::vector<NodeRef> exp2_demo_candidates(const ConstituencyTree& tree,
                                                 bool allow_single_token) {
  std::vector<NodeRef> out;
  for (const auto& r : collect_nodes(tree))
    if (deletable(tree, r) && (allow_single_token || r.node->span.length() >= 2))
      out.push_back(r);
  return out;
}

/// One run of Experiment 2: each demonstration deletes an arbitrary
/// non-root constituent; its test sentence must contain a constituent of
/// the same category and one (possibly the same) under the same parent
/// category.
inline std::vector<Trial> gen_exp2(const SentenceBank& bank, std::size_t n_trials,
                                   std::uint64_t seed, int run_id = 0,
                                   bool allow_single_token = true) {
  std::vector<std::size_t> demos;
  for (std::size_t i = 0; i < bank.size(); ++i)
    if (!exp2_demo_candidates(bank.entries[i].tree, allow_single_token).empty())
      demos.push_back(i);
  if (demos.empty()) throw EmptyPool("no sentence has a deletable constituent");

  Rng rng = make_rng(seed, hash_tag("exp2"), static_cast<std::uint64_t>(run_id));
  shuffle(demos, rng);
  std::set<std::size_t> used_tests;
  std::vector<Trial> out;
  bool any_test = false;
  for (std::size_t d : demos) {
    if (out.size() == n_trials) break;
    const auto& demo_tree = bank.entries[d].tree;
    const auto chosen = detail::pick(exp2_demo_candidates(demo_tree, allow_single_token), rng);
    const auto demo = make_demo(demo_tree, chosen);
    std::vector<std::size_t> tests;
    for (std::size_t i = 0; i < bank.size(); ++i) {
      if (i == d || used_tests.count(i)) continue;
      if (exp2_test_info(bank.entries[i].tree, demo.node_category, demo.parent_category)
              .qualifies())
        tests.push_back(i);
    }
    if (tests.empty()) continue;
    any_test = true;
    const auto ti = detail::pick(tests, rng);
    used_tests.insert(ti);
    Trial t;
    t.trial_id = detail::trial_id(Experiment::e2, run_id, out.size());
    t.run_id = run_id;
    t.experiment = Experiment::e2;
    t.demo = demo;
    t.test = bank.entries[ti].tree;
    t.flags.node_parent_split =
        exp2_test_info(t.test, demo.node_category, demo.parent_category).split();
    out.push_back(std::move(t));
  }
  if (!any_test) throw EmptyPool("no demonstration has a matching test sentence");
  if (out.size() < n_trials)
    throw InsufficientPool("built " + std::to_string(out.size()) + " of " +
                           std::to_string(n_trials) + " trials");
  return out;
}

// ---------------------------------------------------------------------------
// Experiment 3

struct Exp3Plan {
  // (node category, parent category) -> occurrence count in the bank
  std::vector<std::pair<std::pair<std::string, std::string>, std::size_t>> combinations;
  std::vector<Demonstration> demonstrations;
};

/// Enumerates every (node, parent) category combination of deletable
/// constituents, most frequent first, and samples up to `per_combo`
/// demonstration constituents for each.
inline Exp3Plan plan_exp3(const SentenceBank& bank, std::size_t per_combo,
                          std::optional<std::size_t> combo_limit, std::uint64_t seed) {
  using Combo = std::pair<std::string, std::string>;
  std::map<Combo, std::vector<Demonstration>> occurrences;
  for (const auto& e : bank.entries)
    for (const auto& r : collect_nodes(e.tree))
      if (deletable(e.tree, r))
        occurrences[{std::string(base_category(r.node->category)),
                     std::string(base_category(r.parent->category))}]
            .push_back(make_demo(e.tree, r));
  Exp3Plan plan;
  for (const auto& [combo, occ] : occurrences) plan.combinations.push_back({combo, occ.size()});
  std::stable_sort(plan.combinations.begin(), plan.combinations.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (combo_limit && plan.combinations.size() > *combo_limit)
    plan.combinations.resize(*combo_limit);
  for (const auto& [combo, count] : plan.combinations) {
    auto occ = occurrences[combo];
    Rng rng = make_rng(seed, hash_tag("exp3"), hash_tag(combo.first + "/" + combo.second));
    shuffle(occ, rng);
    if (occ.size() > per_combo) occ.resize(per_combo);
    for (auto& d : occ) plan.demonstrations.push_back(std::move(d));
  }
  return plan;
}

/// Pairs every test sentence with every planned demonstration drawn from
/// a different sentence.
inline std::vector<Trial> gen_exp3(const SentenceBank& bank,
                                   const std::vector<std::string>& test_ids,
                                   std::size_t per_combo, std::optional<std::size_t> combo_limit,
                                   std::uint64_t seed) {
  for (const auto& id : test_ids)
    if (!bank.find(id)) throw UnknownSentence(id);
  const auto plan = plan_exp3(bank, per_combo, combo_limit, seed);
  std::vector<Trial> out;
  for (const auto& id : test_ids) {
    const auto& test = bank.find(id)->tree;
    for (std::size_t k = 0; k < plan.demonstrations.size(); ++k) {
      const auto& demo = plan.demonstrations[k];
      if (demo.sentence_id == id) continue;
      Trial t;
      char buf[32];
      std::snprintf(buf, sizeof buf, "-d%04zu", k);
      t.trial_id = "3-" + id + buf;
      t.experiment = Experiment::e3;
      t.demo = demo;
      t.test = test;
      out.push_back(std::move(t));
    }
  }
  return out;
}

/// Picks `per_depth` sentences for each syntactic depth in [min, max].
inline std::vector<std::string> select_tests_by_depth(const SentenceBank& bank,
                                                      std::size_t per_depth, int min_depth,
                                                      int max_depth, std::uint64_t seed) {
  std::map<int, std::vector<std::string>> by_depth;
  for (const auto& e : bank.entries) by_depth[depth(e.tree)].push_back(e.sentence_id);
  Rng rng = make_rng(seed, hash_tag("exp3-tests"));
  std::vector<std::string> out;
  for (int d = min_depth; d <= max_depth; ++d) {
    auto ids = by_depth[d];
    shuffle(ids, rng);
    for (std::size_t i = 0; i < std::min(per_depth, ids.size()); ++i) out.push_back(ids[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Experiment 4

struct AmbiguousSentence {
  std::string pair_id;
  std::string type;  // "adjunct" | "pp"
  int condition = 1;  // which structure is plausible
  ConstituencyTree tree;
  Span target_span;

  std::string condition_name() const { return type + "-" + std::to_string(condition); }
};

struct Exp4Demo {
  std::string sentence_id;
  std::string type;
  ConstituencyTree tree;
  Span np2_span;
};

namespace detail {

inline Span span_from_json(const Json& j, int n, const std::string& what) {
  if (!j.is_array() || j.size() != 2) throw FormatError(what + " must be [start, end]");
  Span s{j[0].get<int>(), j[1].get<int>()};
  if (s.start < 0 || s.start >= s.end || s.end > n)
    throw FormatError(what + " " + to_string(s) + " out of range");
  return s;
}

inline std::string require_type(const Json& j) {
  if (!j.contains("type")) throw FormatError("missing type");
  auto type = j.at("type").get<std::string>();
  if (type != "adjunct" && type != "pp") throw FormatError("type must be adjunct or pp");
  return type;
}

}  // namespace detail

inline std::vector<AmbiguousSentence> read_ambiguous(const std::filesystem::path& path) {
  std::size_t line = 0;
  return io::read_jsonl<AmbiguousSentence>(path, [&](const Json& j) {
    ++line;
    for (const char* key : {"pair_id", "type", "condition", "tree", "target_span"})
      if (!j.contains(key)) throw FormatError(std::string("missing ") + key);
    AmbiguousSentence s;
    s.pair_id = j.at("pair_id").is_string() ? j.at("pair_id").get<std::string>()
                                            : j.at("pair_id").dump();
    s.type = detail::require_type(j);
    s.condition = j.at("condition").get<int>();
    if (s.condition != 1 && s.condition != 2) throw FormatError("condition must be 1 or 2");
    s.tree = parse_bracketed(j.at("tree").get<std::string>(), Lang::en,
                             s.pair_id + "-" + std::to_string(s.condition) + "-" +
                                 std::to_string(line));
    if (j.contains("sentence_id")) s.tree.sentence_id = j.at("sentence_id").get<std::string>();
    s.target_span = detail::span_from_json(j.at("target_span"), s.tree.size(), "target_span");
    return s;
  });
}

inline std::vector<Exp4Demo> read_exp4_demos(const std::filesystem::path& path) {
  return io::read_jsonl<Exp4Demo>(path, [](const Json& j) {
    for (const char* key : {"sentence_id", "type", "tree", "np2_span"})
      if (!j.contains(key)) throw FormatError(std::string("missing ") + key);
    Exp4Demo d;
    d.sentence_id = j.at("sentence_id").get<std::string>();
    d.type = detail::require_type(j);
    d.tree = parse_bracketed(j.at("tree").get<std::string>(), Lang::en, d.sentence_id);
    d.np2_span = detail::span_from_json(j.at("np2_span"), d.tree.size(), "np2_span");
    if (!is_node_span(d.tree, d.np2_span))
      throw FormatError("np2_span is not a constituent of " + d.sentence_id);
    return d;
  });
}

/// One run of Experiment 4: `per_condition` trials for each of adjunct-1,
/// adjunct-2, pp-1 and pp-2, never both members of one pair, each paired
/// with a demonstration of the same attachment type that deletes NP2.
inline std::vector<Trial> gen_exp4(const std::vector<AmbiguousSentence>& sentences,
                                   const std::vector<Exp4Demo>& demos, std::uint64_t seed,
                                   int run_id = 0, std::size_t per_condition = 6) {
  std::map<std::string, std::size_t> per_cond_count;
  for (const auto& s : sentences) ++per_cond_count[s.condition_name()];
  for (const char* c : {"adjunct-1", "adjunct-2", "pp-1", "pp-2"})
    if (per_cond_count[c] < per_condition)
      throw PoolError(std::string(c) + " has " + std::to_string(per_cond_count[c]) +
                      " sentences, need " + std::to_string(per_condition));

  Rng rng = make_rng(seed, hash_tag("exp4"), static_cast<std::uint64_t>(run_id));
  std::vector<const AmbiguousSentence*> chosen;
  for (const std::string type : {"adjunct", "pp"}) {
    // pair_id -> sentences per condition
    std::map<std::string, std::array<std::vector<const AmbiguousSentence*>, 2>> pairs;
    for (const auto& s : sentences)
      if (s.type == type) pairs[s.pair_id][static_cast<std::size_t>(s.condition - 1)].push_back(&s);
    std::vector<std::string> ids;
    for (const auto& [id, _] : pairs) ids.push_back(id);
    shuffle(ids, rng);
    std::array<std::size_t, 2> need{per_condition, per_condition};
    // Pairs offering one condition go first; flexible pairs fill the rest.
    std::stable_partition(ids.begin(), ids.end(), [&](const std::string& id) {
      return pairs[id][0].empty() || pairs[id][1].empty();
    });
    for (const auto& id : ids) {
      std::vector<std::size_t> options;
      for (std::size_t c = 0; c < 2; ++c)
        if (need[c] > 0 && !pairs[id][c].empty()) options.push_back(c);
      if (options.empty()) continue;
      const auto c = detail::pick(options, rng);
      chosen.push_back(detail::pick(pairs[id][c], rng));
      --need[c];
    }
    if (need[0] || need[1])
      throw PoolError("not enough distinct " + type + " pairs to fill both conditions");
  }

  std::map<std::string, std::vector<const Exp4Demo*>> demos_by_type;
  for (const auto& d : demos) demos_by_type[d.type].push_back(&d);
  for (const char* type : {"adjunct", "pp"})
    if (demos_by_type[type].empty())
      throw PoolError(std::string("no ") + type + " demonstration sentences");

  shuffle(chosen, rng);
  std::vector<Trial> out;
  for (const auto* s : chosen) {
    const auto* d = detail::pick(demos_by_type[s->type], rng);
    const auto at = nodes_at(d->tree, d->np2_span).front();
    Trial t;
    t.trial_id = detail::trial_id(Experiment::e4, run_id, out.size());
    t.run_id = run_id;
    t.experiment = Experiment::e4;
    t.demo = {d->sentence_id, Lang::en, d->tree.tokens, d->np2_span, at.category,
              at.parent_category.value_or("")};
    t.test = s->tree;
    t.condition = s->condition_name();
    t.target_span = s->target_span;
    out.push_back(std::move(t));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

inline Json span_json(const Span& s) { return Json::array({s.start, s.end}); }

inline Json to_json(const Trial& t) {
  Json j;
  j["trial_id"] = t.trial_id;
  j["run_id"] = t.run_id;
  j["experiment"] = to_string(t.experiment);
  j["lang"] = to_string(t.lang());
  Json demo;
  demo["sentence_id"] = t.demo.sentence_id;
  demo["tokens"] = t.demo.tokens;
  demo["deleted_span"] = span_json(t.demo.deleted_span);
  demo["node_cat"] = t.demo.node_category;
  demo["parent_cat"] = t.demo.parent_category;
  j["demo"] = demo;
  Json test;
  test["sentence_id"] = t.test.sentence_id;
  test["tokens"] = t.test.tokens;
  test["tree"] = to_bracketed(t.test);
  j["test"] = test;
  j["flags"] = {{"np_is_indirect_descendant", t.flags.np_is_indirect_descendant},
                {"node_parent_split", t.flags.node_parent_split}};
  j["condition"] = t.condition ? Json(*t.condition) : Json(nullptr);
  j["target_span"] = t.target_span ? span_json(*t.target_span) : Json(nullptr);
  return j;
}

inline Trial trial_from_json(const Json& j) {
  Trial t;
  t.trial_id = j.at("trial_id").get<std::string>();
  t.run_id = j.at("run_id").get<int>();
  t.experiment = parse_experiment(j.at("experiment").get<std::string>());
  const Lang lang = parse_lang(j.value("lang", std::string("en")));
  const auto& demo = j.at("demo");
  t.demo.sentence_id = demo.at("sentence_id").get<std::string>();
  t.demo.lang = lang;
  t.demo.tokens = demo.at("tokens").get<std::vector<std::string>>();
  t.demo.deleted_span = detail::span_from_json(demo.at("deleted_span"),
                                               static_cast<int>(t.demo.tokens.size()),
                                               "deleted_span");
  t.demo.node_category = demo.at("node_cat").get<std::string>();
  t.demo.parent_category = demo.at("parent_cat").get<std::string>();
  const auto& test = j.at("test");
  t.test = parse_bracketed(test.at("tree").get<std::string>(), lang,
                           test.at("sentence_id").get<std::string>());
  if (test.contains("tokens") && test.at("tokens").get<std::vector<std::string>>() != t.test.tokens)
    throw FormatError("test tokens do not match tree for " + t.trial_id);
  if (j.contains("flags")) {
    t.flags.np_is_indirect_descendant = j["flags"].value("np_is_indirect_descendant", false);
    t.flags.node_parent_split = j["flags"].value("node_parent_split", false);
  }
  if (j.contains("condition") && !j["condition"].is_null())
    t.condition = j["condition"].get<std::string>();
  if (j.contains("target_span") && !j["target_span"].is_null())
    t.target_span = detail::span_from_json(j["target_span"], t.test.size(), "target_span");
  return t;
}

inline std::vector<Trial> read_trials(const std::filesystem::path& path) {
  auto trials = io::read_jsonl<Trial>(path, trial_from_json);
  std::set<std::string> seen;
  for (const auto& t : trials)
    if (!seen.insert(t.trial_id).second)
      throw FormatError(path.string() + ": duplicate trial_id " + t.trial_id);
  return trials;
}

inline std::string trials_to_jsonl(const std::vector<Trial>& trials) {
  std::string out;
  for (const auto& t : trials) out += to_json(t).dump() + "\n";
  return out;
}

}  // namespace probe

#endif  // PROBE_TASKGEN_HPP
