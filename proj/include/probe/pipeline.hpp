#ifndef PROBE_PIPELINE_HPP
#define PROBE_PIPELINE_HPP

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "probe/analysis.hpp"
#include "probe/participants.hpp"
#include "probe/reconstruct.hpp"
#include "probe/stats.hpp"

namespace probe {

/// Classifies every response against its trial's test tree.
inline std::vector<ClassifiedDeletion> classify_responses(const std::vector<Trial>& trials,
                                                          const std::vector<ResponseRecord>& rs) {
  const auto idx = index_trials(trials);
  std::vector<ClassifiedDeletion> out;
  out.reserve(rs.size());
  for (const auto& r : rs) {
    const auto& t = lookup_trial(idx, r.trial_id);
    auto c = classify(extract_deletion(t.test.tokens, r.ok() ? r.raw_text : "", t.lang()), t.test);
    c.trial_id = r.trial_id;
    c.backend = r.backend;
    out.push_back(std::move(c));
  }
  return out;
}

inline std::string classified_to_jsonl(const std::vector<ClassifiedDeletion>& cs) {
  std::string out;
  for (const auto& c : cs) out += to_json(c).dump() + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Statistics over a classified file

/// Human sessions are one backend per participant; they report as a
/// single "human" group whose units are the sessions.
inline std::string backend_family(const std::string& backend) {
  return backend.rfind("human:", 0) == 0 ? "human" : backend;
}

struct StatsOptions {
  std::vector<std::string> metrics = {"constituent_rate"};
  std::optional<std::pair<std::string, std::string>> compare;  // two group labels
  bool paired = false;
  bool dissociation_only = false;  // node/parent ratios on dissociation trials
  std::size_t n_sims = 1000;
  std::size_t n_resamples = 10000;
  std::size_t ci_resamples = 1000;
  double ci_level = 0.95;
  std::uint64_t seed = 0;
  F1Options f1;
  std::size_t chunks = 1;
};

struct AnovaReport {
  std::string group;
  std::size_t n_subjects = 0;
  stats::AnovaResult result;
};

struct StatsOutput {
  std::vector<stats::StatReport> reports;
  std::vector<AnovaReport> anova;
};

inline const std::set<std::string>& known_metrics() {
  static const std::set<std::string> m = {
      "constituent_rate", "node_ratio", "parent_ratio", "rule_preference", "target_string",
      "explained_ratio",  "f1",         "balance",      "position_anova"};
  return m;
}

namespace detail {

using Entry = std::pair<const Trial*, const ClassifiedDeletion*>;

struct Group {
  std::string label;                           // "<backend family>/<lang>"
  std::vector<Entry> entries;                  // file order
  std::map<std::string, std::vector<Entry>> units;  // "<backend>#<run>" -> entries
};

inline std::string unit_key(const Entry& e) {
  return e.second->backend + "#" + std::to_string(e.first->run_id);
}

// Key used to pair units across groups: the run id, or for humans the
// whole unit key (participants are never shared between groups).
inline std::string pairing_key(const std::string& unit) {
  return unit.substr(unit.rfind('#') + 1);
}

inline std::map<std::string, Group> make_groups(const std::vector<Trial>& trials,
                                                const std::vector<ClassifiedDeletion>& cs) {
  const auto idx = index_trials(trials);
  std::map<std::string, Group> groups;
  for (const auto& c : cs) {
    const auto& t = lookup_trial(idx, c.trial_id);
    const auto label = backend_family(c.backend) + "/" + to_string(t.lang());
    auto& g = groups[label];
    g.label = label;
    const Entry e{&t, &c};
    g.entries.push_back(e);
    g.units[unit_key(e)].push_back(e);
  }
  return groups;
}

inline double rate(const std::vector<Entry>& es) {
  std::size_t hit = 0;
  for (const auto& [t, c] : es) hit += c->cls == DeletionClass::constituent;
  return static_cast<double>(hit) / static_cast<double>(es.size());
}

inline std::vector<Entry> subset(const std::vector<Entry>& es, bool dissociation_only) {
  if (!dissociation_only) return es;
  std::vector<Entry> out;
  for (const auto& e : es)
    if (is_dissociation_trial(*e.first)) out.push_back(e);
  return out;
}

inline std::optional<RuleRatios> ratios(const std::vector<Entry>& es) {
  try {
    return rule_explained_ratios(es);
  } catch (const NoConstituentTests&) {
    return std::nullopt;
  }
}

// Per-unit values of a run-level metric; units without a value are skipped.
inline std::map<std::string, double> unit_values(const Group& g, const std::string& metric,
                                                 const StatsOptions& opt) {
  std::map<std::string, double> out;
  for (const auto& [key, es] : g.units) {
    if (metric == "constituent_rate") {
      out[key] = rate(es);
      continue;
    }
    const auto r = ratios(subset(es, opt.dissociation_only));
    if (!r) continue;
    if (metric == "node_ratio") out[key] = r->node_ratio;
    if (metric == "parent_ratio") out[key] = r->parent_ratio;
    if (metric == "rule_preference") out[key] = r->node_ratio - r->parent_ratio;
  }
  return out;
}

inline std::vector<double> values_of(const std::map<std::string, double>& m) {
  std::vector<double> v;
  for (const auto& [k, x] : m) v.push_back(x);
  return v;
}

inline void attach_ci(stats::StatReport& r, const std::vector<double>& samples,
                      const StatsOptions& opt, std::uint64_t seed) {
  if (samples.size() < 2) return;
  const auto ci = stats::bootstrap_ci(samples, opt.ci_level, opt.ci_resamples, seed);
  r.ci_low = ci.low;
  r.ci_high = ci.high;
}

struct TreeUnits {
  std::map<std::string, double> values;  // sentence_id -> metric
  std::vector<TreeChanceSentence> chance;
};

inline TreeUnits tree_units(const Group& g, const std::string& metric, const StatsOptions& opt) {
  std::vector<Trial> trials;
  std::vector<ClassifiedDeletion> cs;
  std::set<std::string> seen;
  for (const auto& [t, c] : g.entries) {
    if (seen.insert(t->trial_id).second) trials.push_back(*t);
    cs.push_back(*c);
  }
  // Distinct backends answering the same trial are pooled as one listener.
  for (auto& c : cs) c.backend.clear();
  TreeUnits out;
  const auto m = metric == "explained_ratio" ? TreeMetric::explained_ratio
                 : metric == "f1"            ? TreeMetric::f1
                                             : TreeMetric::balance;
  for (const auto& r : reconstruct_all(trials, cs, opt.f1)) {
    const double v = tree_metric(m, r.reconstructed, r.linguistic, opt.f1);
    out.chance.push_back({r.distribution.n, r.distribution.total, r.linguistic});
    if (!std::isinf(v)) out.values[r.reconstructed.sentence_id] = v;
  }
  return out;
}

inline stats::StatReport base_report(const std::string& metric, const std::string& group,
                                     double observed, std::uint64_t seed) {
  stats::StatReport r;
  r.metric = metric;
  r.group = group;
  r.observed = observed;
  r.seed = seed;
  r.test = "";
  return r;
}

}  // namespace detail

/// Reports for every requested metric and group. p-values of all tests
/// are FDR-adjusted together.
inline StatsOutput compute_stats(const std::vector<Trial>& trials,
                                 const std::vector<ClassifiedDeletion>& classified,
                                 const StatsOptions& opt) {
  for (const auto& m : opt.metrics)
    if (!known_metrics().count(m)) throw SpecError("unknown metric '" + m + "'");
  if (classified.empty()) throw EmptyGroup("no classified responses");
  const auto groups = detail::make_groups(trials, classified);
  StatsOutput out;

  auto seed_for = [&](const std::string& metric, const std::string& group) {
    return derive_seed(opt.seed, hash_tag(metric), hash_tag(group));
  };

  for (const auto& metric : opt.metrics) {
    for (const auto& [label, g] : groups) {
      const auto seed = seed_for(metric, label);
      if (metric == "constituent_rate") {
        std::vector<stats::ChanceSentence> tests;
        for (const auto& [t, c] : g.entries) tests.push_back(stats::chance_sentence(t->test));
        auto r = stats::monte_carlo_p(
            detail::rate(g.entries), stats::random_span_rate(tests),
            {opt.n_sims, seed, stats::Direction::greater, opt.chunks});
        r.metric = metric;
        r.group = label;
        detail::attach_ci(r, detail::values_of(detail::unit_values(g, metric, opt)), opt, seed);
        out.reports.push_back(r);
      } else if (metric == "node_ratio" || metric == "parent_ratio") {
        const auto pooled = detail::ratios(detail::subset(g.entries, opt.dissociation_only));
        if (!pooled) continue;
        auto r = detail::base_report(
            metric, label, metric == "node_ratio" ? pooled->node_ratio : pooled->parent_ratio,
            seed);
        detail::attach_ci(r, detail::values_of(detail::unit_values(g, metric, opt)), opt, seed);
        out.reports.push_back(r);
      } else if (metric == "rule_preference") {
        std::vector<double> node, parent;
        for (const auto& [key, es] : g.units)
          if (const auto rr = detail::ratios(detail::subset(es, opt.dissociation_only))) {
            node.push_back(rr->node_ratio);
            parent.push_back(rr->parent_ratio);
          }
        if (node.size() < 2) continue;
        const auto b = stats::bootstrap_compare(node, parent, true, opt.n_resamples, seed);
        auto r = detail::base_report(metric, label, b.observed_difference, seed);
        r.p_raw = r.p_fdr = b.p;
        r.n_resamples = opt.n_resamples;
        r.test = "bootstrap_paired_two_sided";
        std::vector<double> diff;
        for (std::size_t i = 0; i < node.size(); ++i) diff.push_back(node[i] - parent[i]);
        detail::attach_ci(r, diff, opt, seed);
        out.reports.push_back(r);
      } else if (metric == "target_string") {
        for (const std::string type : {"adjunct", "pp"}) {
          std::vector<double> s1, s2;
          for (const auto& [key, es] : g.units) {
            std::vector<detail::Entry> in_type;
            for (const auto& e : es)
              if (e.first->condition && e.first->condition->rfind(type + "-", 0) == 0)
                in_type.push_back(e);
            const auto rates = target_string_rates(in_type);
            const auto a = rates.find(type + "-1"), b = rates.find(type + "-2");
            if (a == rates.end() || b == rates.end()) continue;
            s1.push_back(a->second);
            s2.push_back(b->second);
          }
          if (s1.size() < 2) continue;
          const auto tseed = seed_for(metric + ":" + type, label);
          const auto b = stats::bootstrap_compare(s1, s2, true, opt.n_resamples, tseed);
          auto r = detail::base_report(metric + ":" + type, label, b.observed_difference, tseed);
          r.p_raw = r.p_fdr = b.p;
          r.n_resamples = opt.n_resamples;
          r.test = "bootstrap_paired_two_sided";
          out.reports.push_back(r);
        }
      } else if (metric == "explained_ratio" || metric == "f1" || metric == "balance") {
        auto tu = detail::tree_units(g, metric, opt);
        if (tu.values.empty()) continue;
        const auto vals = detail::values_of(tu.values);
        stats::StatReport r;
        if (metric == "balance") {
          r = detail::base_report(metric, label, stats::mean(vals), seed);
        } else {
          const auto m = metric == "f1" ? TreeMetric::f1 : TreeMetric::explained_ratio;
          r = stats::monte_carlo_p(stats::mean(vals),
                                   random_tree_chance(std::move(tu.chance), m, opt.f1),
                                   {opt.n_sims, seed, stats::Direction::greater, opt.chunks});
          r.metric = metric;
          r.group = label;
        }
        detail::attach_ci(r, vals, opt, seed);
        out.reports.push_back(r);
      } else if (metric == "position_anova") {
        std::vector<std::vector<double>> rows;
        for (const auto& [key, es] : g.units) {
          std::vector<double> row;
          for (const auto& [t, c] : es) row.push_back(c->cls == DeletionClass::constituent);
          rows.push_back(std::move(row));
        }
        if (rows.size() < 2) continue;
        out.anova.push_back({label, rows.size(), stats::rm_anova(rows)});
      }
    }

    if (opt.compare && metric != "position_anova" && metric != "target_string") {
      const auto& [la, lb] = *opt.compare;
      const auto ga = groups.find(la), gb = groups.find(lb);
      if (ga == groups.end()) throw EmptyGroup("no responses in group '" + la + "'");
      if (gb == groups.end()) throw EmptyGroup("no responses in group '" + lb + "'");
      std::map<std::string, double> va, vb;
      const bool tree_metric_name =
          metric == "explained_ratio" || metric == "f1" || metric == "balance";
      if (tree_metric_name) {
        va = detail::tree_units(ga->second, metric, opt).values;
        vb = detail::tree_units(gb->second, metric, opt).values;
      } else {
        for (const auto& [k, v] : detail::unit_values(ga->second, metric, opt))
          va[opt.paired ? detail::pairing_key(k) : k] = v;
        for (const auto& [k, v] : detail::unit_values(gb->second, metric, opt))
          vb[opt.paired ? detail::pairing_key(k) : k] = v;
      }
      std::vector<double> a, b;
      if (opt.paired) {
        for (const auto& [k, v] : va) {
          auto it = vb.find(k);
          if (it == vb.end()) throw SizeMismatch("unit '" + k + "' missing from " + lb);
          a.push_back(v);
          b.push_back(it->second);
        }
        if (vb.size() != va.size()) throw SizeMismatch(lb + " has units missing from " + la);
      } else {
        a = detail::values_of(va);
        b = detail::values_of(vb);
      }
      const auto label = la + " vs " + lb;
      const auto seed = seed_for(metric + ":compare", label);
      const auto res = stats::bootstrap_compare(a, b, opt.paired, opt.n_resamples, seed);
      auto r = detail::base_report(metric, label, res.observed_difference, seed);
      r.p_raw = r.p_fdr = res.p;
      r.n_resamples = opt.n_resamples;
      r.test = opt.paired ? "bootstrap_paired_two_sided" : "bootstrap_unpaired_two_sided";
      out.reports.push_back(r);
    }
  }

  std::vector<double> ps;
  for (const auto& r : out.reports)
    if (!r.test.empty()) ps.push_back(r.p_raw);
  if (!ps.empty()) {
    const auto q = stats::fdr_adjust(ps);
    std::size_t i = 0;
    for (auto& r : out.reports)
      if (!r.test.empty()) r.p_fdr = q[i++];
  }
  return out;
}

inline Json to_json(const stats::StatReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); };
  const bool tested = !r.test.empty();
  Json j;
  j["metric"] = r.metric;
  j["group"] = r.group;
  j["observed"] = r.observed;
  j["chance_mean"] = opt(r.chance_mean);
  j["chance_sd"] = opt(r.chance_sd);
  j["p_raw"] = tested ? Json(r.p_raw) : Json(nullptr);
  j["p_fdr"] = tested ? Json(r.p_fdr) : Json(nullptr);
  j["ci_low"] = opt(r.ci_low);
  j["ci_high"] = opt(r.ci_high);
  j["n_sims"] = r.n_sims;
  j["n_resamples"] = r.n_resamples;
  j["seed"] = r.seed;
  j["test"] = tested ? Json(r.test) : Json(nullptr);
  return j;
}

inline Json to_json(const AnovaReport& a) {
  Json j;
  j["group"] = a.group;
  j["n_subjects"] = a.n_subjects;
  j["F"] = a.result.F;
  j["df1"] = a.result.df1;
  j["df2"] = a.result.df2;
  j["p"] = a.result.p;
  return j;
}

inline Json to_json(const AggregateTreeStats& s) {
  Json j;
  j["n_trees"] = s.n_trees;
  j["mean_depth"] = s.mean_depth;
  j["mean_balance"] = s.mean_balance ? Json(*s.mean_balance) : Json(nullptr);
  Json hist = Json::object();
  for (const auto& [d, c] : s.depth_histogram) hist[std::to_string(d)] = c;
  j["depth_histogram"] = hist;
  Json width = Json::object();
  for (const auto& [l, w] : s.mean_width_by_level) width[std::to_string(l)] = w;
  j["mean_width_by_level"] = width;
  return j;
}

}  // namespace probe

#endif  // PROBE_PIPELINE_HPP
