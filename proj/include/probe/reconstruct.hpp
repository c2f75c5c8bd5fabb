#ifndef PROBE_RECONSTRUCT_HPP
#define PROBE_RECONSTRUCT_HPP

#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "probe/analysis.hpp"
#include "probe/io.hpp"
#include "probe/stats.hpp"
#include "probe/tree.hpp"

namespace probe {

// Pooled deleted spans for one test sentence.
struct SpanDistribution {
  std::string sentence_id;
  int n = 0;
  std::map<Span, std::uint64_t> counts;
  std::uint64_t total = 0;

  double proportion(const Span& s) const {
    auto it = counts.find(s);
    return it == counts.end() ? 0.0
                              : static_cast<double>(it->second) / static_cast<double>(total);
  }

  std::uint64_t count(const Span& s) const {
    auto it = counts.find(s);
    return it == counts.end() ? 0 : it->second;
  }
};

inline SpanDistribution make_distribution(std::string sentence_id, int n,
                                          const std::map<Span, std::uint64_t>& counts) {
  if (n < 1) throw FormatError("sentence length must be positive");
  SpanDistribution d{std::move(sentence_id), n, {}, 0};
  for (const auto& [s, c] : counts) {
    if (s.start < 0 || s.start >= s.end || s.end > n)
      throw FormatError("span " + to_string(s) + " outside sentence of length " +
                        std::to_string(n));
    if (c == 0) continue;
    d.counts[s] = c;
    d.total += c;
  }
  if (d.total == 0) throw EmptyPool("no deleted spans for " + d.sentence_id);
  return d;
}

/// Pools every single-gap deletion (constituent or not) for one sentence;
/// "other" and multi-gap records carry no single span and are skipped.
inline SpanDistribution span_distribution(const std::vector<ClassifiedDeletion>& records, int n,
                                          std::string sentence_id = {}) {
  std::map<Span, std::uint64_t> counts;
  for (const auto& r : records)
    if (r.cls != DeletionClass::other && r.kind == DeletionKind::single_gap && r.span)
      ++counts[*r.span];
  return make_distribution(std::move(sentence_id), n, counts);
}

struct ReconstructedTree {
  std::string sentence_id;
  ConstituencyTree tree;  // strictly binary, every label "X"
  std::uint64_t explained = 0;
  double explained_ratio = 0;
  std::vector<std::pair<Span, double>> unexplained;
};

namespace detail {

inline Node build_cky_node(const std::vector<std::vector<int>>& split, int i, int j) {
  Node n{"X", {i, j}, {}};
  if (j - i == 1) return n;
  const int k = split[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  n.children.push_back(build_cky_node(split, i, k));
  n.children.push_back(build_cky_node(split, k, j));
  return n;
}

}  // namespace detail

/// Binary tree maximizing the summed counts of its node spans. Scores are
/// integer counts, so ties are exact and go to the smallest split point.
inline ReconstructedTree cky_reconstruct(const SpanDistribution& dist,
                                         std::vector<std::string> tokens = {}) {
  const int n = dist.n;
  if (tokens.empty())
    for (int i = 0; i < n; ++i) tokens.push_back("w" + std::to_string(i));
  if (static_cast<int>(tokens.size()) != n)
    throw LengthMismatch("tokens do not match distribution length");

  const auto N = static_cast<std::size_t>(n) + 1;
  std::vector<std::vector<std::uint64_t>> best(N, std::vector<std::uint64_t>(N, 0));
  std::vector<std::vector<int>> split(N, std::vector<int>(N, -1));
  for (int len = 1; len <= n; ++len) {
    for (int i = 0; i + len <= n; ++i) {
      const int j = i + len;
      const auto w = dist.count({i, j});
      if (len == 1) {
        best[i][j] = w;
        continue;
      }
      std::uint64_t top = 0;
      int arg = -1;
      for (int k = i + 1; k < j; ++k) {
        const auto v = best[i][k] + best[k][j];
        if (arg < 0 || v > top) top = v, arg = k;
      }
      best[i][j] = w + top;
      split[i][j] = arg;
    }
  }

  ReconstructedTree out;
  out.sentence_id = dist.sentence_id;
  out.tree.sentence_id = dist.sentence_id;
  out.tree.tokens = std::move(tokens);
  out.tree.root = detail::build_cky_node(split, 0, n);
  out.explained = best[0][static_cast<std::size_t>(n)];
  out.explained_ratio = static_cast<double>(out.explained) / static_cast<double>(dist.total);
  const auto spans = node_spans(out.tree);
  for (const auto& [s, c] : dist.counts)
    if (!spans.count(s)) out.unexplained.push_back({s, dist.proportion(s)});
  return out;
}

/// Share of pooled deletions whose span is a node of `tree`.
inline double tree_explained_ratio(const ConstituencyTree& tree, const SpanDistribution& dist) {
  if (tree.size() != dist.n)
    throw LengthMismatch("tree has " + std::to_string(tree.size()) + " tokens, distribution " +
                         std::to_string(dist.n));
  std::uint64_t hit = 0;
  for (const auto& s : node_spans(tree)) hit += dist.count(s);
  return static_cast<double>(hit) / static_cast<double>(dist.total);
}

// Which node spans count as constituents for F1.
struct F1Options {
  int min_length = 2;
  bool include_root = true;
};

inline SpanSet f1_spans(const ConstituencyTree& tree, const F1Options& opt = {}) {
  SpanSet out;
  for (const auto& s : node_spans(tree))
    if (s.length() >= opt.min_length && (opt.include_root || s != tree.root.span)) out.insert(s);
  return out;
}

/// F1 = 2 * overlap / (|A| + |B|) over unlabeled, deduplicated spans.
inline double f1_score(const ConstituencyTree& a, const ConstituencyTree& b,
                       const F1Options& opt = {}) {
  if (a.size() != b.size())
    throw LengthMismatch("trees have " + std::to_string(a.size()) + " and " +
                         std::to_string(b.size()) + " tokens");
  const auto sa = f1_spans(a, opt), sb = f1_spans(b, opt);
  if (sa.empty() && sb.empty()) return 1.0;
  std::size_t overlap = 0;
  for (const auto& s : sa) overlap += sb.count(s);
  return 2.0 * static_cast<double>(overlap) / static_cast<double>(sa.size() + sb.size());
}

struct AggregateTreeStats {
  std::size_t n_trees = 0;
  double mean_depth = 0;
  std::optional<double> mean_balance;  // over trees with a finite factor
  std::map<int, std::size_t> depth_histogram;
  std::map<int, double> mean_width_by_level;  // nodes per level, preterminals included
};

/// Summary statistics over strictly binary trees.
inline AggregateTreeStats aggregate_tree_stats(const std::vector<ConstituencyTree>& trees) {
  if (trees.empty()) throw EmptyList("no trees to aggregate");
  AggregateTreeStats s;
  s.n_trees = trees.size();
  double depth_sum = 0, balance_sum = 0;
  std::size_t n_balance = 0;
  std::map<int, std::pair<std::size_t, std::size_t>> width;  // level -> (nodes, trees)
  for (const auto& t : trees) {
    const int d = depth(t);
    depth_sum += d;
    ++s.depth_histogram[d];
    if (const auto bf = balance_factor(t); !bf.is_infinite()) {
      balance_sum += bf.value();
      ++n_balance;
    }
    std::map<int, std::size_t> per_level;
    visit(t.root, [&](const Node&, const Node*, int level) { ++per_level[level]; });
    for (const auto& [level, count] : per_level) {
      width[level].first += count;
      ++width[level].second;
    }
  }
  s.mean_depth = depth_sum / static_cast<double>(trees.size());
  if (n_balance) s.mean_balance = balance_sum / static_cast<double>(n_balance);
  for (const auto& [level, w] : width)
    s.mean_width_by_level[level] = static_cast<double>(w.first) / static_cast<double>(w.second);
  return s;
}

/// Binarized treebank tree with unary chains removed: the reference that
/// deletion-based trees are compared against.
inline ConstituencyTree reference_binary_tree(const ConstituencyTree& tree) {
  return collapse_unary(binarize(tree));
}

// ---------------------------------------------------------------------------
// Pooled reconstruction over a classified file

struct SentenceReconstruction {
  ReconstructedTree reconstructed;
  ConstituencyTree linguistic;  // binarized, unary chains collapsed
  SpanDistribution distribution;
  double f1_vs_linguistic = 0;
  Ratio balance_deletion;
  Ratio balance_linguistic;
};

/// Groups classified responses by test sentence and reconstructs each.
/// Sentences without any single-gap deletion are skipped.
inline std::vector<SentenceReconstruction> reconstruct_all(
    const std::vector<Trial>& trials, const std::vector<ClassifiedDeletion>& classified,
    const F1Options& f1 = {}) {
  const auto idx = index_trials(trials);
  std::map<std::string, std::pair<const Trial*, std::vector<ClassifiedDeletion>>> by_sentence;
  for (const auto& c : classified) {
    const auto& t = lookup_trial(idx, c.trial_id);
    auto& slot = by_sentence[t.test.sentence_id];
    slot.first = &t;
    slot.second.push_back(c);
  }
  std::vector<SentenceReconstruction> out;
  for (const auto& [sid, slot] : by_sentence) {
    const auto& test = slot.first->test;
    SpanDistribution dist;
    try {
      dist = span_distribution(slot.second, test.size(), sid);
    } catch (const EmptyPool&) {
      continue;
    }
    SentenceReconstruction r{cky_reconstruct(dist, test.tokens), reference_binary_tree(test),
                             dist, 0, {}, {}};
    r.reconstructed.tree.lang = test.lang;
    r.f1_vs_linguistic = f1_score(r.reconstructed.tree, r.linguistic, f1);
    r.balance_deletion = balance_factor(r.reconstructed.tree);
    r.balance_linguistic = balance_factor(r.linguistic);
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Chance trees

enum class TreeMetric { explained_ratio, f1, balance };

// A test sentence for tree-level chance simulations: its length, how many
// deletions it received, and the reference tree for F1.
struct TreeChanceSentence {
  int n = 0;
  std::uint64_t deletions = 0;
  ConstituencyTree reference;
};

inline double tree_metric(TreeMetric m, const ReconstructedTree& r,
                          const ConstituencyTree& reference, const F1Options& f1) {
  switch (m) {
    case TreeMetric::explained_ratio: return r.explained_ratio;
    case TreeMetric::f1: return f1_score(r.tree, reference, f1);
    case TreeMetric::balance: {
      const auto b = balance_factor(r.tree);
      return b.is_infinite() ? std::numeric_limits<double>::infinity() : b.value();
    }
  }
  return 0;
}

/// Mean of `metric` over sentences whose trees are reconstructed from the
/// same number of uniformly random spans (whole sentence excluded) as the
/// real data. Infinite balance factors are left out of the mean.
inline stats::Simulation random_tree_chance(std::vector<TreeChanceSentence> sentences,
                                            TreeMetric metric, F1Options f1 = {}) {
  return [sentences = std::move(sentences), metric, f1](Rng& rng) {
    double sum = 0;
    std::size_t used = 0;
    for (const auto& s : sentences) {
      std::map<Span, std::uint64_t> counts;
      for (std::uint64_t i = 0; i < s.deletions; ++i)
        ++counts[stats::random_span(s.n, rng, false)];
      const auto r = cky_reconstruct(make_distribution({}, s.n, counts));
      const double v = tree_metric(metric, r, s.reference, f1);
      if (std::isinf(v)) continue;
      sum += v;
      ++used;
    }
    return used ? sum / static_cast<double>(used) : 0.0;
  };
}

inline std::string ratio_field(const Ratio& r) {
  return r.is_infinite() ? "inf" : io::fmt_double(r.value());
}

inline Json to_json(const ReconstructedTree& r, const SpanDistribution& dist) {
  Json j;
  j["sentence_id"] = r.sentence_id;
  j["tree"] = to_bracketed(r.tree);
  j["explained_ratio"] = r.explained_ratio;
  Json unexplained = Json::array();
  for (const auto& [s, p] : r.unexplained)
    unexplained.push_back({{"span", span_json(s)}, {"proportion", p}});
  j["unexplained"] = unexplained;
  j["n"] = dist.n;
  j["total"] = dist.total;
  return j;
}

inline std::string scores_to_csv(const std::vector<SentenceReconstruction>& rows) {
  std::string out =
      "sentence_id,explained_ratio,f1_vs_linguistic,balance_factor_deletion,"
      "balance_factor_linguistic\n";
  for (const auto& r : rows)
    out += r.reconstructed.sentence_id + "," + io::fmt_double(r.reconstructed.explained_ratio) +
           "," + io::fmt_double(r.f1_vs_linguistic) + "," + ratio_field(r.balance_deletion) + "," +
           ratio_field(r.balance_linguistic) + "\n";
  return out;
}

}  // namespace probe

#endif  // PROBE_RECONSTRUCT_HPP
