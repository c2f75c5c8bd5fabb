#include <fstream>

#include <gtest/gtest.h>

#include "probe/bank.hpp"
#include "support.hpp"

using namespace probe;
using support::tree;

namespace {

SentenceBank bank_of(const std::vector<std::string>& lines, Lang lang = Lang::en) {
  SentenceBank b;
  int i = 0;
  for (const auto& l : lines) {
    auto t = tree(l, lang, "s" + std::to_string(i++));
    b.entries.push_back({t.sentence_id, t, l});
  }
  return b;
}

void write(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

}  // namespace

TEST(Filter, DefaultsExcludeShortSentences) {
  const auto b = bank_of({"(S (NP (PRP I)) (VP (VBD saw) (NP (PRP it))))",
                          "(S (NP (NNP John)) (VP (VBD found) (NP (DT the) (NN cat))))"});
  const auto kept = filter_bank(b, {});
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(kept.entries[0].sentence_id, "s1");
}

TEST(Filter, ExcludedLabels) {
  const auto b = bank_of({
      "(S (NP (-NONE- *)) (VP (VBD found) (NP (DT the) (NN cat))) (ADVP (RB now)))",
      "(S (NP (NNP John)) (VP (VBD found) (NP (CD two) (NNS cats))))",
      "(S (NP (NNP John)) (VP (VBD found) (NP (DT the) (NN cat))))",
  });
  const auto kept = filter_bank(b, {});
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(kept.entries[0].sentence_id, "s2");
}

TEST(Filter, DepthAndLengthBounds) {
  const auto b = bank_of({"(S (NP (NNP John)) (VP (VBD found) (NP (DT the) (NN cat))))"});
  FilterCriteria c;
  c.max_depth = 3;
  EXPECT_TRUE(filter_bank(b, c).empty());
  c = {};
  c.max_len = 3;
  EXPECT_TRUE(filter_bank(b, c).empty());
  EXPECT_TRUE(filter_bank(SentenceBank{}, {}).empty());
}

TEST(Ingest, StripsFinalPunctuation) {
  const auto t = strip_final_punctuation(tree("(S (NP (NNP John)) (VP (VBD ran)) (. .))"));
  ASSERT_TRUE(t);
  EXPECT_EQ(t->tokens, (std::vector<std::string>{"John", "ran"}));
  const auto zh = strip_final_punctuation(tree("(IP (NP (PN 他)) (VP (VV 走)) (PU 。))", Lang::zh));
  ASSERT_TRUE(zh);
  EXPECT_EQ(zh->size(), 2);
}

TEST(Ingest, FixtureFilesLoadAndPassFilters) {
  for (auto lang : {Lang::en, Lang::zh}) {
    const auto bank = support::fixture_bank(lang);
    EXPECT_GE(bank.size(), 30u);
    EXPECT_EQ(filter_bank(bank, {}).size(), bank.size());
    for (const auto& e : bank.entries) {
      EXPECT_EQ(e.lang(), lang);
      std::set<std::string> seen;
      for (const auto& tok : e.tokens()) EXPECT_TRUE(seen.insert(text::ascii_lower(tok)).second)
          << e.sentence_id << " repeats " << tok;
    }
  }
}

TEST(Ingest, IdsCommentsAndDuplicates) {
  support::TempDir dir;
  write(dir / "a.trees",
        "# comment\n"
        "x1\t(S (NP (NNP John)) (VP (VBD found) (NP (DT the) (NN cat))))\n"
        "\n"
        "(S (NP (NNP Mary)) (VP (VBD saw) (NP (DT a) (NN dog))))\n");
  const auto bank = read_trees(dir / "a.trees", Lang::en);
  ASSERT_EQ(bank.size(), 2u);
  EXPECT_EQ(bank.entries[0].sentence_id, "x1");
  EXPECT_EQ(bank.entries[1].sentence_id, "a-4");

  write(dir / "dup.trees", "x\t(S (NP (NN a)) (VP (VB b)))\nx\t(S (NP (NN c)) (VP (VB d)))\n");
  EXPECT_THROW(read_trees(dir / "dup.trees", Lang::en), FormatError);
  write(dir / "bad.trees", "(S (NP (NN a)\n");
  EXPECT_THROW(read_trees(dir / "bad.trees", Lang::en), FormatError);
  EXPECT_THROW(read_trees(dir / "missing.trees", Lang::en), IoError);
}

TEST(BankJson, RoundTrip) {
  support::TempDir dir;
  const auto bank = support::fixture_bank(Lang::zh);
  io::write_file_atomic(dir / "bank.jsonl", bank_to_jsonl(bank));
  const auto again = read_bank(dir / "bank.jsonl");
  ASSERT_EQ(again.size(), bank.size());
  for (std::size_t i = 0; i < bank.size(); ++i) {
    EXPECT_EQ(again.entries[i].tree, bank.entries[i].tree);
    EXPECT_EQ(again.entries[i].source_line, bank.entries[i].source_line);
  }
  EXPECT_EQ(bank_to_jsonl(again), bank_to_jsonl(bank));
}

TEST(BankJson, TokenMismatchAndDuplicatesRejected) {
  Json j;
  j["sentence_id"] = "s";
  j["lang"] = "en";
  j["tree"] = "(S (NP (NNP John)) (VP (VBD ran)))";
  j["tokens"] = {"John", "walked"};
  EXPECT_THROW(bank_entry_from_json(j), FormatError);

  support::TempDir dir;
  j["tokens"] = {"John", "ran"};
  write(dir / "b.jsonl", j.dump() + "\n" + j.dump() + "\n");
  EXPECT_THROW(read_bank(dir / "b.jsonl"), FormatError);
}
