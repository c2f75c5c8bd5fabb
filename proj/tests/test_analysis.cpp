#include <gtest/gtest.h>

#include "probe/analysis.hpp"
#include "support.hpp"

using namespace probe;
using support::tree;

namespace {

const char* kTest = "(S (NP (PRP We)) (VP (VBD put) (NP (DT some) (NNS orders)) (ADVP (RB together))))";

std::vector<std::string> words(std::initializer_list<const char*> w) { return {w.begin(), w.end()}; }

ClassifiedDeletion with_class(DeletionClass cls) {
  ClassifiedDeletion c;
  c.cls = cls;
  return c;
}

Trial trial_for(const std::string& test, Span demo_span, const std::string& demo_tree,
                const std::string& id) {
  Trial t;
  t.trial_id = id;
  const auto d = tree(demo_tree);
  const auto at = nodes_at(d, demo_span).front();
  t.demo = {"d", Lang::en, d.tokens, demo_span, at.category, at.parent_category.value_or("")};
  t.test = tree(test);
  return t;
}

std::string join(const std::vector<std::string>& tokens, std::size_t from, std::size_t to) {
  std::string out;
  for (std::size_t i = from; i < to; ++i) out += (out.empty() ? "" : " ") + tokens[i];
  return out;
}

}  // namespace

TEST(Extract, SingleGapConstituent) {
  const auto t = tree(kTest);
  const auto r = extract_deletion(t.tokens, "We put together", Lang::en);
  EXPECT_EQ(r.kind, DeletionKind::single_gap);
  EXPECT_EQ(r.span(), (Span{2, 4}));
  const auto c = classify(r, t);
  EXPECT_EQ(c.cls, DeletionClass::constituent);
  EXPECT_EQ(c.node_category(), "NP");
  EXPECT_EQ(c.parent_category(), "VP");
}

TEST(Extract, NonConstituentAndOther) {
  const auto t = tree(kTest);
  const auto nc = classify(extract_deletion(t.tokens, "We put some", Lang::en), t);
  EXPECT_EQ(nc.cls, DeletionClass::nonconstituent);
  EXPECT_EQ(nc.span, (Span{3, 5}));
  EXPECT_TRUE(nc.nodes.empty());

  EXPECT_EQ(extract_deletion(t.tokens, "We put some orders together", Lang::en).kind,
            DeletionKind::no_deletion);
  EXPECT_EQ(extract_deletion(t.tokens, "", Lang::en).kind, DeletionKind::empty);
  EXPECT_EQ(extract_deletion(t.tokens, "They put some orders together", Lang::en).kind,
            DeletionKind::addition);
  EXPECT_EQ(extract_deletion(t.tokens, "We put some orders together now", Lang::en).kind,
            DeletionKind::addition);
  for (const char* s : {"", "We put some orders together", "They sat"})
    EXPECT_EQ(classify(extract_deletion(t.tokens, s, Lang::en), t).cls, DeletionClass::other);
}

TEST(Extract, MultiGapIsNonConstituent) {
  const auto t = tree(kTest);
  const auto r = extract_deletion(t.tokens, "put orders", Lang::en);
  EXPECT_EQ(r.kind, DeletionKind::multi_gap);
  EXPECT_EQ(r.gaps, (std::vector<Span>{{0, 1}, {2, 3}, {4, 5}}));
  EXPECT_EQ(classify(r, t).cls, DeletionClass::nonconstituent);
}

TEST(Extract, RepeatedTokensUseLongestPrefix) {
  const auto r = extract_deletion(words({"the", "dog", "saw", "the", "dog"}), "the dog", Lang::en);
  EXPECT_EQ(r.span(), (Span{2, 5}));
}

TEST(Extract, QuotesCaseAndPunctuation) {
  const auto t = tree(kTest);
  for (const char* s : {"we put together.", "“We put together”", "John would say: 'We put together'",
                        "He would say ‘we PUT together’.", "  We   put together!  "}) {
    SCOPED_TRACE(s);
    EXPECT_EQ(extract_deletion(t.tokens, s, Lang::en).span(), (Span{2, 4}));
  }
}

TEST(Extract, Chinese) {
  const auto t = tree("(IP (NP (NR 张三)) (VP (VV 喜欢) (NP (NN 音乐))))", Lang::zh);
  const auto r = extract_deletion(t.tokens, "约翰会说：‘张三喜欢。’", Lang::zh);
  EXPECT_EQ(r.span(), (Span{4, 6}));
  EXPECT_EQ(classify(r, t).cls, DeletionClass::constituent);
}

TEST(Extract, EveryContiguousDeletionIsRecovered) {
  for (auto lang : {Lang::en, Lang::zh}) {
    for (const auto& e : support::fixture_bank(lang).entries) {
      const auto& tok = e.tokens();
      const auto n = tok.size();
      const auto spans = node_spans(e.tree);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j <= n; ++j) {
          if (i == 0 && j == n) continue;
          std::vector<std::string> kept(tok.begin(), tok.begin() + static_cast<long>(i));
          kept.insert(kept.end(), tok.begin() + static_cast<long>(j), tok.end());
          const auto response = text::detokenize(kept, lang);
          const auto r = extract_deletion(tok, response, lang);
          const Span s{static_cast<int>(i), static_cast<int>(j)};
          ASSERT_EQ(r.span(), s) << e.sentence_id << " " << response;
          const bool is_node = std::find(spans.begin(), spans.end(), s) != spans.end();
          EXPECT_EQ(classify(r, e.tree).cls,
                    is_node ? DeletionClass::constituent : DeletionClass::nonconstituent);
        }
    }
  }
}

TEST(Extract, TwoDisjointDeletionsGiveBothGaps) {
  for (const auto& e : support::fixture_bank(Lang::en).entries) {
    const auto& tok = e.tokens();
    const auto n = static_cast<int>(tok.size());
    for (int a = 0; a + 3 < n; ++a) {
      // Drop [a, a+1) and [a+2, a+3).
      std::vector<std::string> kept;
      for (int i = 0; i < n; ++i)
        if (i != a && i != a + 2) kept.push_back(tok[static_cast<std::size_t>(i)]);
      const auto r = extract_deletion(tok, join(kept, 0, kept.size()), Lang::en);
      EXPECT_EQ(r.kind, DeletionKind::multi_gap) << e.sentence_id;
      EXPECT_EQ(r.gaps, (std::vector<Span>{{a, a + 1}, {a + 2, a + 3}}));
    }
  }
}

TEST(Rates, ConstituentRateCountsOtherInDenominator) {
  std::vector<ClassifiedDeletion> g(20, with_class(DeletionClass::constituent));
  g.insert(g.end(), 3, with_class(DeletionClass::nonconstituent));
  g.push_back(with_class(DeletionClass::other));
  EXPECT_DOUBLE_EQ(constituent_rate(g), 20.0 / 24.0);
  EXPECT_EQ(constituent_rate(std::vector<ClassifiedDeletion>(5, with_class(DeletionClass::other))),
            0.0);
  EXPECT_THROW(constituent_rate({}), EmptyGroup);
}

TEST(Rates, RuleRatios) {
  const std::string demo = "(S (NP (PRP She)) (VP (VBD had) (NP (DT an) (NN idea))))";
  const auto direct = trial_for("(S (NP (NNP John)) (VP (VBD found) (NP (DT the) (NN cat))))",
                                {2, 4}, demo, "a");
  const auto indirect = trial_for(
      "(S (NP (PRP We)) (VP (VBD walked) (PP (IN to) (NP (DT the) (NN station)))))", {2, 4},
      demo, "b");
  const auto ca = classify(extract_deletion(direct.test.tokens, "John found", Lang::en), direct.test);
  const auto cb_node = classify(extract_deletion(indirect.test.tokens, "We walked to", Lang::en),
                                indirect.test);
  const auto cb_parent =
      classify(extract_deletion(indirect.test.tokens, "We walked", Lang::en), indirect.test);
  const auto r = rule_explained_ratios({{&direct, &ca}, {&indirect, &cb_node}});
  EXPECT_EQ(r.n_constituent, 2u);
  EXPECT_EQ(r.node_ratio, 1.0);
  EXPECT_EQ(r.parent_ratio, 0.5);
  const auto p = rule_explained_ratios({{&direct, &ca}, {&indirect, &cb_parent}});
  EXPECT_EQ(p.node_ratio, 0.5);
  EXPECT_EQ(p.parent_ratio, 1.0);

  const auto other = classify(extract_deletion(direct.test.tokens, "", Lang::en), direct.test);
  EXPECT_THROW(rule_explained_ratios({{&direct, &other}}), NoConstituentTests);
}

TEST(Rates, TargetString) {
  const std::string demo = "(S (NP (PRP He)) (VP (VBD ate) (NP (DT the) (NN bread))))";
  auto a = trial_for("(S (NP (PRP She)) (VP (VBD hit) (NP (DT the) (NN man))))", {2, 4}, demo, "a");
  a.condition = "pp-1";
  a.target_span = Span{2, 4};
  auto b = a;
  b.trial_id = "b";
  const auto hit = classify(extract_deletion(a.test.tokens, "She hit", Lang::en), a.test);
  const auto miss = classify(extract_deletion(a.test.tokens, "She the man", Lang::en), a.test);
  const auto rates = target_string_rates({{&a, &hit}, {&b, &miss}});
  EXPECT_EQ(rates, (std::map<std::string, double>{{"pp-1", 0.5}}));
  b.target_span.reset();
  EXPECT_THROW(target_string_rates({{&a, &hit}, {&b, &miss}}), MissingTargetSpan);
}

TEST(Analyze, GroupsByBackendAndRun) {
  const std::string demo = "(S (NP (PRP She)) (VP (VBD had) (NP (DT an) (NN idea))))";
  std::vector<Trial> trials;
  for (int run = 0; run < 2; ++run) {
    auto t = trial_for("(S (NP (NNP John)) (VP (VBD found) (NP (DT the) (NN cat))))", {2, 4}, demo,
                       "t" + std::to_string(run));
    t.run_id = run;
    trials.push_back(t);
  }
  std::vector<ClassifiedDeletion> cs;
  for (const auto& [backend, text] : std::vector<std::pair<std::string, std::string>>{
           {"b", "John found"}, {"a", "found the cat"}})
    for (const auto& t : trials) {
      auto c = classify(extract_deletion(t.test.tokens, text, Lang::en), t.test);
      c.trial_id = t.trial_id;
      c.backend = backend;
      cs.push_back(c);
    }
  const auto rows = analyze(trials, cs);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0].backend, "a");
  EXPECT_EQ(rows[1].run_id, 1);
  EXPECT_EQ(rows[0].constituent_rate, 1.0);
  EXPECT_EQ(rows[0].node_ratio, 1.0);
  EXPECT_EQ(rows[0].parent_ratio, 0.0);
  EXPECT_EQ(rows[3].parent_ratio, 1.0);
  EXPECT_FALSE(rows[0].node_ratio_dissociation);
  const auto csv = metrics_to_csv(rows);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);

  cs.front().trial_id = "missing";
  EXPECT_THROW(analyze(trials, cs), UnknownTrial);
}

TEST(ClassifiedJson, RoundTrip) {
  const auto t = tree(kTest);
  for (const char* s : {"We put together", "put orders", "", "We put some"}) {
    auto c = classify(extract_deletion(t.tokens, s, Lang::en), t);
    c.trial_id = "x";
    c.backend = "sim:node";
    const auto again = classified_from_json(to_json(c));
    EXPECT_EQ(to_json(again).dump(), to_json(c).dump());
  }
}
