#ifndef PROBE_PROMPT_HPP
#define PROBE_PROMPT_HPP

#include <filesystem>
#include <map>
#include <string>
#include <utility>

#include "probe/io.hpp"
#include "probe/taskgen.hpp"

namespace probe {

// Prompt templates keyed by (id, language). Placeholders: {demo},
// {remainder}, {test}.
class TemplateSet {
 public:
  static TemplateSet builtin() {
    TemplateSet set;
    const std::string en =
        "John developed a very special way of speaking. For ‘{demo}’, he would say "
        "‘{remainder}’. Please carefully examine John’s speaking style, and guess what "
        "he would say for the sentence: ‘{test}’";
    const std::string zh =
        "约翰形成了一种非常特别的说话方式。对于‘{demo}’，他会说‘{remainder}’。"
        "请仔细观察约翰的说话风格，并猜测对于这个句子他会怎么说：‘{test}’";
    set.add("default", Lang::en, en);
    set.add("default", Lang::zh, zh);
    // Shown to human participants: each test carries the independence reminder.
    set.add("session", Lang::en,
            en + "\n\nNote: this test is independent of all previous tests.");
    set.add("session", Lang::zh, zh + "\n\n注意：本题与之前的所有题目相互独立。");
    return set;
  }

  void add(const std::string& id, Lang lang, std::string text) {
    templates_[{id, lang}] = std::move(text);
  }

  void load(const std::filesystem::path& path, const std::string& id, Lang lang) {
    auto text = io::read_file(path);
    while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
    add(id, lang, std::move(text));
  }

  bool contains(const std::string& id, Lang lang) const {
    return templates_.count({id, lang}) > 0;
  }

  const std::string& get(const std::string& id, Lang lang) const {
    auto it = templates_.find({id, lang});
    if (it == templates_.end())
      throw UnknownTemplate("'" + id + "' has no " + to_string(lang) + " variant");
    return it->second;
  }

 private:
  std::map<std::pair<std::string, Lang>, std::string> templates_;
};

inline std::string replace_all(std::string s, const std::string& from, const std::string& to) {
  for (std::size_t at = s.find(from); at != std::string::npos; at = s.find(from, at + to.size()))
    s.replace(at, from.size(), to);
  return s;
}

/// English remainders always start lowercase ("she had").
inline std::string render_remainder(const Demonstration& demo) {
  auto text = text::detokenize(demo.remainder(), demo.lang);
  return demo.lang == Lang::en ? text::lowercase_first(std::move(text)) : text;
}

inline std::string render_prompt(const Trial& trial, const std::string& template_id, Lang lang,
                                 const TemplateSet& templates = TemplateSet::builtin()) {
  const auto& tpl = templates.get(template_id, lang);
  // Placeholders become sentinels first, so sentence text that happens to
  // contain "{test}" is never expanded.
  std::string out = tpl;
  out = replace_all(out, "{demo}", "\x01");
  out = replace_all(out, "{remainder}", "\x02");
  out = replace_all(out, "{test}", "\x03");
  out = replace_all(out, "\x01", text::detokenize(trial.demo.tokens, trial.demo.lang));
  out = replace_all(out, "\x02", render_remainder(trial.demo));
  out = replace_all(out, "\x03", text::detokenize(trial.test.tokens, trial.test.lang));
  return out;
}

}  // namespace probe

#endif  // PROBE_PROMPT_HPP
