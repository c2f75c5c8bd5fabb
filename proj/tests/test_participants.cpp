#include <fstream>

#include <gtest/gtest.h>

#include "probe/analysis.hpp"
#include "probe/participants.hpp"
#include "support.hpp"

using namespace probe;
using support::tree;

namespace {

Trial john_trial(const std::string& id = "t0") {
  Trial t;
  t.trial_id = id;
  const auto demo = tree("(S (NP (PRP She)) (VP (VBD had) (NP (DT an) (NN idea))))");
  t.demo = {"d", Lang::en, demo.tokens, {2, 4}, "NP", "VP"};
  t.test = tree("(S (NP (NNP John)) (VP (VBD found) (NP (DT the) (NN cat))))");
  return t;
}

std::vector<Trial> exp1_trials(std::uint64_t seed = 1) {
  return gen_exp1(support::fixture_bank(Lang::en), 24, seed, Exp1Variant::a);
}

ClassifiedDeletion classify_record(const Trial& t, const ResponseRecord& r) {
  return classify(extract_deletion(t.test.tokens, r.raw_text, t.lang()), t.test);
}

void write_lines(const std::filesystem::path& p, const std::vector<Json>& lines) {
  std::ofstream out(p);
  for (const auto& j : lines) out << j.dump() << "\n";
}

}  // namespace

TEST(Agents, NodeAgentDeletesAnNp) {
  std::set<std::string> seen;
  for (std::uint64_t seed = 0; seed < 50; ++seed)
    seen.insert(sim_respond(john_trial(), "node", seed).raw_text);
  EXPECT_EQ(seen, (std::set<std::string>{"found the cat", "John found"}));
}

TEST(Agents, ParentAgentDeletesUnderVp) {
  std::set<std::string> seen;
  for (std::uint64_t seed = 0; seed < 50; ++seed)
    seen.insert(sim_respond(john_trial(), "parent", seed).raw_text);
  // Children of the VP: the verb and the object NP.
  EXPECT_EQ(seen, (std::set<std::string>{"John found", "John the cat"}));
}

TEST(Agents, OtherAgentRepeatsSentence) {
  const auto r = sim_respond(john_trial(), "other", 3);
  EXPECT_EQ(r.raw_text, "John found the cat");
  EXPECT_EQ(r.backend, "sim:other");
  EXPECT_EQ(classify_record(john_trial(), r).cls, DeletionClass::other);
}

TEST(Agents, RandomSpanNeverDeletesEverything) {
  const auto t = john_trial();
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    const auto c = classify_record(t, sim_respond(t, "random-span", seed));
    EXPECT_EQ(c.kind, DeletionKind::single_gap);
    EXPECT_LT(c.span->length(), 4);
  }
}

TEST(Agents, TreeSpanDeletesReferenceNodes) {
  for (const auto& e : support::fixture_bank(Lang::zh).entries) {
    Trial t = john_trial(e.sentence_id);
    t.test = e.tree;
    const auto ref = node_spans(collapse_unary(binarize(e.tree)));
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto c = classify_record(t, sim_respond(t, "tree-span", seed));
      ASSERT_TRUE(c.span) << e.sentence_id;
      EXPECT_TRUE(ref.count(*c.span));
    }
  }
}

TEST(Agents, PureMixEqualsPureAgent) {
  for (const auto& t : exp1_trials()) {
    const auto pure = sim_respond(t, "node", 11);
    const auto mixed = sim_respond(t, "mix(node=1)", 11);
    EXPECT_EQ(mixed.raw_text, pure.raw_text);
    EXPECT_EQ(mixed.backend, "sim:node");
  }
  EXPECT_EQ(parse_agent_spec(" mix(random-span=0.15, parent=0.8, other=0.05) ").canonical(),
            "mix(parent=0.8,random-span=0.15,other=0.05)");
}

TEST(Agents, MixComponentsAnswerAsPureAgents) {
  const auto trials = exp1_trials();
  for (const auto& t : trials) {
    const auto r = sim_respond(t, "mix(node=0.5,parent=0.5)", 4);
    ASSERT_TRUE(r.fallback);
    const auto rule = *r.fallback;
    EXPECT_EQ(r.raw_text, sim_respond(t, rule, 4).raw_text) << t.trial_id;
  }
}

TEST(Agents, Deterministic) {
  for (const auto& t : exp1_trials()) {
    const auto a = sim_respond(t, "mix(parent=0.8,random-span=0.15,other=0.05)", 9);
    const auto b = sim_respond(t, "mix(parent=0.8,random-span=0.15,other=0.05)", 9);
    EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
    EXPECT_FALSE(a.timestamp);
  }
}

TEST(Agents, SpecErrors) {
  for (const char* bad : {"", "nodes", "mix(node=0.5)", "mix(node=0.5,parent=0.6)",
                          "mix(node=-0.5,parent=1.5)", "mix(node=1", "mix(bogus=1)",
                          "mix(node=0.5,node=0.5)", "mix(node=x)"})
    EXPECT_THROW(parse_agent_spec(bad), SpecError) << bad;
}

TEST(Agents, NodeFallsBackToParentThenRandom) {
  Trial t = john_trial();
  t.demo.node_category = "ADJP";
  const auto r = sim_respond(t, "node", 1);
  EXPECT_EQ(r.fallback, "parent");
  EXPECT_TRUE(r.raw_text == "John found" || r.raw_text == "John the cat") << r.raw_text;
  t.demo.parent_category = "SBAR";
  EXPECT_EQ(sim_respond(t, "node", 1).fallback, "random-span");
  EXPECT_EQ(sim_respond(t, "parent", 1).fallback, "random-span");
}

TEST(Agents, NodeAgentPerfectOnExp1) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto trials = exp1_trials(seed);
    for (const auto& t : trials) {
      const auto c = classify_record(t, sim_respond(t, "node", seed));
      EXPECT_EQ(c.cls, DeletionClass::constituent) << t.trial_id;
      EXPECT_TRUE(matches_node_rule(c, t.demo));
    }
  }
}

TEST(Records, JsonRoundTripAndDuplicates) {
  ResponseRecord r{"t1", "llm:m", "text “quoted”", 12.5, true, "2026-01-01T00:00:00Z", "node",
                   std::nullopt};
  EXPECT_EQ(to_json(response_from_json(to_json(r))).dump(), to_json(r).dump());
  support::TempDir dir;
  io::write_file_atomic(dir / "r.jsonl", responses_to_jsonl({r, r}));
  try {
    read_responses(dir / "r.jsonl");
    FAIL() << "expected DuplicateResponse";
  } catch (const DuplicateResponse& e) {
    EXPECT_EQ(e.trial_ids(), std::vector<std::string>{"t1"});
  }
}

TEST(Sessions, ImportTwentyFourAnswers) {
  const auto trials = exp1_trials();
  std::set<std::string> known;
  std::vector<std::string> ids;
  for (const auto& t : trials) known.insert(t.trial_id), ids.push_back(t.trial_id);
  support::TempDir dir;
  std::vector<Json> lines = {session_header_json("s1", {{"age", 30}}, ids)};
  for (const auto& t : trials)
    lines.push_back(session_response_json("s1", t.trial_id, sim_respond(t, "node", 1).raw_text,
                                          "2026-01-01T00:00:00Z"));
  write_lines(dir / "s1.jsonl", lines);
  const auto report = import_sessions({dir / "s1.jsonl"}, known);
  ASSERT_EQ(report.records.size(), 24u);
  EXPECT_TRUE(report.unanswered.empty());
  EXPECT_TRUE(report.constant_answer_sessions.empty());
  EXPECT_EQ(report.records[0].backend, "human:s1");
  const auto idx = index_trials(trials);
  for (const auto& r : report.records)
    EXPECT_EQ(classify_record(lookup_trial(idx, r.trial_id), r).cls, DeletionClass::constituent);
}

TEST(Sessions, ImportErrors) {
  support::TempDir dir;
  const std::set<std::string> known = {"a", "b"};
  write_lines(dir / "unknown.jsonl", {session_header_json("s", {}, {"a"}),
                                      session_response_json("s", "zzz", "x", "")});
  EXPECT_THROW(import_sessions({dir / "unknown.jsonl"}, known), UnknownTrial);

  write_lines(dir / "dup.jsonl", {session_header_json("s", {}, {"a", "b"}),
                                  session_response_json("s", "a", "x", ""),
                                  session_response_json("s", "a", "y", "")});
  try {
    import_sessions({dir / "dup.jsonl"}, known);
    FAIL() << "expected DuplicateResponse";
  } catch (const DuplicateResponse& e) {
    EXPECT_NE(std::string(e.what()).find("a"), std::string::npos);
    EXPECT_EQ(e.trial_ids(), std::vector<std::string>{"a"});
  }

  std::ofstream(dir / "bad.jsonl") << "{\"type\":\"response\"}\n";
  try {
    import_sessions({dir / "bad.jsonl"}, known);
    FAIL() << "expected SchemaError";
  } catch (const SchemaError& e) {
    EXPECT_NE(std::string(e.what()).find("bad.jsonl:1"), std::string::npos);
  }
}

TEST(Sessions, UnansweredAndConstantAnswers) {
  support::TempDir dir;
  write_lines(dir / "s.jsonl", {session_header_json("s", {}, {"a", "b", "c"}),
                                session_response_json("s", "a", "same", ""),
                                session_response_json("s", "b", "same", "")});
  const auto r = import_sessions({dir / "s.jsonl"}, {"a", "b", "c"});
  EXPECT_EQ(r.unanswered, (std::vector<std::pair<std::string, std::string>>{{"s", "c"}}));
  EXPECT_EQ(r.constant_answer_sessions, std::vector<std::string>{"s"});
}
