#ifndef PROBE_BANK_HPP
#define PROBE_BANK_HPP

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "probe/io.hpp"
#include "probe/tree.hpp"

namespace probe {

struct BankEntry {
  std::string sentence_id;
  ConstituencyTree tree;
  std::string source_line;

  Lang lang() const { return tree.lang; }
  const std::vector<std::string>& tokens() const { return tree.tokens; }
};

struct SentenceBank {
  std::vector<BankEntry> entries;

  bool empty() const { return entries.empty(); }
  std::size_t size() const { return entries.size(); }

  const BankEntry* find(const std::string& id) const {
    for (const auto& e : entries)
      if (e.sentence_id == id) return &e;
    return nullptr;
  }
};

inline std::set<std::string> default_excluded_labels() {
  return {"-NONE-", "CD", "PU", ".", ",", ":", "``", "''", "-LRB-", "-RRB-",
          "#", "$", "HYPH", "NFP"};
}

struct FilterCriteria {
  int min_len = 4;
  int max_len = 15;
  int min_depth = 3;
  int max_depth = 8;
  std::set<std::string> excluded_labels = default_excluded_labels();
};

inline bool passes(const ConstituencyTree& tree, const FilterCriteria& c) {
  const int n = tree.size();
  if (n < c.min_len || n > c.max_len) return false;
  const auto m = tree_metrics(tree);
  if (m.depth < c.min_depth || m.depth > c.max_depth) return false;
  for (const auto& info : m.constituent_spans)
    if (c.excluded_labels.count(info.category)) return false;
  return true;
}

inline SentenceBank filter_bank(const SentenceBank& bank, const FilterCriteria& criteria) {
  SentenceBank out;
  for (const auto& e : bank.entries)
    if (passes(e.tree, criteria)) out.entries.push_back(e);
  return out;
}

// Drops trailing tokens made only of punctuation; the sentence-final mark
// is not part of the counted words.
inline std::optional<ConstituencyTree> strip_final_punctuation(const ConstituencyTree& tree) {
  int cut = tree.size();
  auto all_punct = [](const std::string& tok) {
    for (const auto& ch : text::utf8_chars(tok))
      if (!text::is_punct(ch)) return false;
    return true;
  };
  while (cut > 0 && all_punct(tree.tokens[static_cast<std::size_t>(cut - 1)])) --cut;
  if (cut == tree.size()) return tree;
  return prune_leaves(tree, [cut](const Node& leaf) { return leaf.span.start >= cut; });
}

/// Reads a ".trees" file: one bracketed tree per line, optionally
/// prefixed by "<id>\t". Lines starting with '#' are comments. Trees
/// without an explicit id are named "<stem>-<line>".
inline SentenceBank read_trees(const std::filesystem::path& path, Lang lang,
                               bool strip_punctuation = true) {
  SentenceBank bank;
  std::set<std::string> seen;
  const auto stem = path.stem().string();
  io::for_each_line(path, [&](const std::string& raw, std::size_t no) {
    const auto first = raw.find_first_not_of(" \t");
    if (raw[first] == '#') return;
    std::string id, body = raw;
    if (const auto tab = raw.find('\t'); tab != std::string::npos && raw[first] != '(') {
      id = raw.substr(0, tab);
      body = raw.substr(tab + 1);
    } else {
      id = stem + "-" + std::to_string(no);
    }
    ConstituencyTree tree;
    try {
      tree = parse_bracketed(body, lang, id);
    } catch (const ParseError& e) {
      throw FormatError(path.string() + ":" + std::to_string(no) + ": " + e.what());
    }
    if (strip_punctuation) {
      auto stripped = strip_final_punctuation(tree);
      if (!stripped) return;
      tree = std::move(*stripped);
    }
    validate(tree);
    if (!seen.insert(id).second)
      throw FormatError(path.string() + ":" + std::to_string(no) + ": duplicate id " + id);
    bank.entries.push_back({id, std::move(tree), body});
  });
  return bank;
}

inline Json to_json(const BankEntry& e) {
  Json j;
  j["sentence_id"] = e.sentence_id;
  j["lang"] = to_string(e.lang());
  j["tokens"] = e.tokens();
  j["tree"] = to_bracketed(e.tree);
  j["source_line"] = e.source_line;
  return j;
}

inline BankEntry bank_entry_from_json(const Json& j) {
  BankEntry e;
  e.sentence_id = j.at("sentence_id").get<std::string>();
  const Lang lang = parse_lang(j.at("lang").get<std::string>());
  e.tree = parse_bracketed(j.at("tree").get<std::string>(), lang, e.sentence_id);
  validate(e.tree);
  if (j.contains("tokens") && j.at("tokens").get<std::vector<std::string>>() != e.tree.tokens)
    throw FormatError("tokens do not match tree leaves for " + e.sentence_id);
  e.source_line = j.value("source_line", to_bracketed(e.tree));
  return e;
}

inline SentenceBank read_bank(const std::filesystem::path& path) {
  SentenceBank bank;
  bank.entries = io::read_jsonl<BankEntry>(path, bank_entry_from_json);
  std::set<std::string> seen;
  for (const auto& e : bank.entries)
    if (!seen.insert(e.sentence_id).second)
      throw FormatError(path.string() + ": duplicate sentence_id " + e.sentence_id);
  return bank;
}

inline std::string bank_to_jsonl(const SentenceBank& bank) {
  std::string out;
  for (const auto& e : bank.entries) out += to_json(e).dump() + "\n";
  return out;
}

}  // namespace probe

#endif  // PROBE_BANK_HPP
