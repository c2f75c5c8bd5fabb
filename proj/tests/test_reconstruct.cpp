#include <gtest/gtest.h>

#include "probe/reconstruct.hpp"
#include "support.hpp"

using namespace probe;
using support::tree;

namespace {

SpanDistribution john_found_the_cat() {
  return make_distribution("john", 4, {{{2, 4}, 53}, {{1, 4}, 44}, {{0, 2}, 3}});
}

ConstituencyTree x_tree(Node root, int n) {
  ConstituencyTree t;
  t.sentence_id = "x";
  for (int i = 0; i < n; ++i) t.tokens.push_back("w" + std::to_string(i));
  t.root = std::move(root);
  return t;
}

// Exhaustive maximum over every binary tree.
std::uint64_t brute_force_best(const SpanDistribution& d) {
  std::uint64_t best = 0;
  for (const auto& root : support::all_binary_nodes(0, d.n)) {
    std::uint64_t hit = 0;
    for (const auto& s : node_spans(x_tree(root, d.n))) hit += d.count(s);
    best = std::max(best, hit);
  }
  return best;
}

SpanDistribution random_distribution(int n, Rng& rng) {
  std::map<Span, std::uint64_t> counts;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j <= n; ++j)
      if (uniform01(rng) < 0.5) counts[{i, j}] = uniform_index(rng, 20);
  counts[{0, 1}] += 1;
  return make_distribution("r", n, counts);
}

ClassifiedDeletion record(DeletionClass cls, std::optional<Span> span) {
  ClassifiedDeletion c;
  c.cls = cls;
  c.kind = span ? DeletionKind::single_gap : DeletionKind::empty;
  c.span = span;
  return c;
}

}  // namespace

TEST(Distribution, JohnFoundTheCatProportions) {
  const auto d = john_found_the_cat();
  EXPECT_EQ(d.total, 100u);
  EXPECT_DOUBLE_EQ(d.proportion({2, 4}), 0.53);
  EXPECT_DOUBLE_EQ(d.proportion({1, 4}), 0.44);
  EXPECT_DOUBLE_EQ(d.proportion({0, 2}), 0.03);
  EXPECT_EQ(d.proportion({0, 1}), 0.0);
}

TEST(Distribution, OnlyOtherRecordsIsEmptyPool) {
  std::vector<ClassifiedDeletion> rs(4, record(DeletionClass::other, std::nullopt));
  EXPECT_THROW(span_distribution(rs, 4), EmptyPool);
  EXPECT_THROW(make_distribution("x", 3, {{{0, 4}, 1}}), FormatError);
}

TEST(Distribution, TotalMatchesRecount) {
  Rng rng = make_rng(3);
  std::vector<ClassifiedDeletion> rs;
  std::map<Span, std::uint64_t> expected;
  std::uint64_t counted = 0;
  for (int i = 0; i < 500; ++i) {
    const auto u = uniform_index(rng, 3);
    if (u == 2) {
      rs.push_back(record(DeletionClass::other, std::nullopt));
      continue;
    }
    const auto s = stats::random_span(6, rng, false);
    rs.push_back(record(u ? DeletionClass::constituent : DeletionClass::nonconstituent, s));
    ++expected[s];
    ++counted;
  }
  const auto d = span_distribution(rs, 6);
  EXPECT_EQ(d.total, counted);
  EXPECT_EQ(d.counts, expected);
}

TEST(Cky, JohnFoundTheCatWorkedExample) {
  const auto r = cky_reconstruct(john_found_the_cat(), {"John", "found", "the", "cat"});
  EXPECT_EQ(to_bracketed(r.tree), "(X (X John) (X (X found) (X (X the) (X cat))))");
  EXPECT_EQ(r.explained, 97u);
  EXPECT_EQ(r.explained_ratio, 97.0 / 100.0);
  ASSERT_EQ(r.unexplained.size(), 1u);
  EXPECT_EQ(r.unexplained[0].first, (Span{0, 2}));
  EXPECT_EQ(tree_explained_ratio(r.tree, john_found_the_cat()), 0.97);
  const auto alt = tree("(X (X (X John) (X found)) (X (X the) (X cat)))");
  EXPECT_EQ(tree_explained_ratio(alt, john_found_the_cat()), 0.56);
  EXPECT_NEAR(f1_score(r.tree, alt), 2.0 / 3.0, 1e-12);
}

TEST(Cky, TwoTokens) {
  const auto d = make_distribution("x", 2, {{{0, 1}, 2}, {{1, 2}, 3}, {{0, 2}, 5}});
  const auto r = cky_reconstruct(d);
  EXPECT_EQ(to_bracketed(r.tree), "(X (X w0) (X w1))");
  EXPECT_EQ(r.explained_ratio, 1.0);
}

TEST(Cky, FullSpanOnlyExplainsEveryTree) {
  const auto d = make_distribution("x", 5, {{{0, 5}, 7}});
  for (const auto& root : support::all_binary_nodes(0, 5))
    EXPECT_EQ(tree_explained_ratio(x_tree(root, 5), d), 1.0);
  // All splits tie, so the smallest split wins at every level.
  EXPECT_EQ(to_bracketed(cky_reconstruct(d).tree),
            "(X (X w0) (X (X w1) (X (X w2) (X (X w3) (X w4)))))");
}

TEST(Cky, MatchesExhaustiveSearch) {
  Rng rng = make_rng(41);
  for (int n = 2; n <= 7; ++n)
    for (int rep = 0; rep < 40; ++rep) {
      const auto d = random_distribution(n, rng);
      const auto r = cky_reconstruct(d);
      EXPECT_EQ(r.explained, brute_force_best(d)) << "n=" << n;
      EXPECT_TRUE(is_strictly_binary(r.tree));
      EXPECT_EQ(tree_explained_ratio(r.tree, d), r.explained_ratio);
      EXPECT_EQ(to_bracketed(cky_reconstruct(d).tree), to_bracketed(r.tree));
    }
}

TEST(Cky, RecoversTreeWhenEveryNodeObserved) {
  Rng rng = make_rng(8);
  for (int rep = 0; rep < 200; ++rep) {
    const int n = 2 + static_cast<int>(uniform_index(rng, 10));
    const auto t = support::random_binary_tree(n, rng);
    std::map<Span, std::uint64_t> counts;
    for (const auto& s : node_spans(t)) counts[s] = 1 + uniform_index(rng, 5);
    const auto r = cky_reconstruct(make_distribution("x", n, counts), t.tokens);
    EXPECT_EQ(node_spans(r.tree), node_spans(t));
    EXPECT_EQ(r.explained_ratio, 1.0);
  }
}

TEST(Cky, LengthMismatch) {
  EXPECT_THROW(cky_reconstruct(john_found_the_cat(), {"a"}), LengthMismatch);
  EXPECT_THROW(tree_explained_ratio(tree("(X (X a) (X b))"), john_found_the_cat()), LengthMismatch);
}

TEST(F1, IdenticalDisjointAndSymmetric) {
  const auto t = tree("(X (X a) (X (X b) (X c)))");
  EXPECT_EQ(f1_score(t, t), 1.0);
  // Right-branching vs left-branching on five tokens: only the root is shared.
  const auto right = tree("(X (X a) (X (X b) (X (X c) (X (X d) (X e)))))");
  const auto left = tree("(X (X (X (X (X a) (X b)) (X c)) (X d)) (X e))");
  const auto l = f1_spans(right).size(), d = f1_spans(left).size();
  EXPECT_EQ(l, 4u);
  EXPECT_EQ(f1_score(right, left), 2.0 / static_cast<double>(l + d));

  Rng rng = make_rng(5);
  for (int rep = 0; rep < 200; ++rep) {
    const int n = 2 + static_cast<int>(uniform_index(rng, 8));
    const auto a = support::random_binary_tree(n, rng);
    const auto b = support::random_binary_tree(n, rng);
    const double f = f1_score(a, b);
    EXPECT_EQ(f, f1_score(b, a));
    EXPECT_GE(f, 0.0);
    EXPECT_LE(f, 1.0);
    EXPECT_EQ(f == 1.0, f1_spans(a) == f1_spans(b));
  }
  EXPECT_THROW(f1_score(t, right), LengthMismatch);
}

TEST(Aggregate, MeanBalance) {
  const auto right = tree("(X (W a) (X (W b) (W c)))");
  const auto left = tree("(X (X (W a) (W b)) (W c))");
  const auto s = aggregate_tree_stats({right, left});
  EXPECT_EQ(s.mean_balance, 1.25);
  EXPECT_EQ(s.mean_depth, 3.0);
  EXPECT_EQ(s.depth_histogram, (std::map<int, std::size_t>{{3, 2}}));
  const auto one = aggregate_tree_stats({right});
  EXPECT_EQ(one.mean_balance, 2.0);
  EXPECT_EQ(one.mean_depth, depth(right));
  EXPECT_THROW(aggregate_tree_stats({}), EmptyList);
}

TEST(Aggregate, EnglishFixturesMoreRightBranching) {
  std::map<Lang, double> mean;
  for (auto lang : {Lang::en, Lang::zh}) {
    std::vector<ConstituencyTree> refs;
    for (const auto& e : support::fixture_bank(lang).entries)
      refs.push_back(reference_binary_tree(e.tree));
    mean[lang] = *aggregate_tree_stats(refs).mean_balance;
  }
  EXPECT_GT(mean[Lang::en], mean[Lang::zh]);
}

TEST(ReconstructAll, PoolsBySentence) {
  const auto test = tree("(S (NP (NNP John)) (VP (VBD found) (NP (DT the) (NN cat))))");
  std::vector<Trial> trials;
  std::vector<ClassifiedDeletion> cs;
  const std::vector<std::pair<Span, int>> pool = {{{2, 4}, 53}, {{1, 4}, 44}, {{0, 2}, 3}};
  for (const auto& [span, count] : pool)
    for (int i = 0; i < count; ++i) {
      Trial t;
      t.trial_id = "t" + std::to_string(trials.size());
      t.test = test;
      trials.push_back(t);
      auto c = record(DeletionClass::constituent, span);
      c.trial_id = t.trial_id;
      cs.push_back(c);
    }
  const auto rows = reconstruct_all(trials, cs);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].reconstructed.explained_ratio, 0.97);
  EXPECT_EQ(to_bracketed(rows[0].reconstructed.tree),
            "(X (X John) (X (X found) (X (X the) (X cat))))");
  EXPECT_EQ(rows[0].f1_vs_linguistic, 1.0);
  EXPECT_EQ(rows[0].balance_deletion, Ratio::make(6, 2));
  EXPECT_NE(scores_to_csv(rows).find("t,0.970000,1.000000,3.000000,3.000000"), std::string::npos) << scores_to_csv(rows);
}
