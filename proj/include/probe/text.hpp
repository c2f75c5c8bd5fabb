#ifndef PROBE_TEXT_HPP
#define PROBE_TEXT_HPP

#include <algorithm>
#include <array>
#include <cctype>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "probe/error.hpp"

namespace probe {

enum class Lang { en, zh };

inline std::string to_string(Lang lang) { return lang == Lang::en ? "en" : "zh"; }

inline Lang parse_lang(std::string_view s) {
  if (s == "en") return Lang::en;
  if (s == "zh") return Lang::zh;
  throw FormatError("unknown language '" + std::string(s) + "' (expected en or zh)");
}

namespace text {

// Splits a UTF-8 string into code points. Malformed bytes are passed
// through one at a time rather than rejected.
inline std::vector<std::string> utf8_chars(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = 1;
    if (c >= 0xF0) len = 4;
    else if (c >= 0xE0) len = 3;
    else if (c >= 0xC0) len = 2;
    if (i + len > s.size()) len = 1;
    out.emplace_back(s.substr(i, len));
    i += len;
  }
  return out;
}

inline bool is_space(std::string_view ch) {
  return ch == " " || ch == "\t" || ch == "\n" || ch == "\r" || ch == "　" ||
         ch == " ";
}

inline bool is_quote(std::string_view ch) {
  static constexpr std::array<std::string_view, 12> quotes = {
      "'", "\"", "`", "‘", "’", "“", "”",
      "「", "」", "『", "』", "«"};
  return std::find(quotes.begin(), quotes.end(), ch) != quotes.end();
}

inline bool is_punct(std::string_view ch) {
  static constexpr std::array<std::string_view, 24> marks = {
      ".", ",", "!", "?", ";", ":", "。", "，", "！", "？",
      "；", "：", "、", "…", "—", "-", "(", ")",
      "（", "）", "[", "]", "»", "．"};
  return is_quote(ch) || std::find(marks.begin(), marks.end(), ch) != marks.end();
}

inline std::string ascii_lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

inline std::string trim(std::string_view s) {
  auto chars = utf8_chars(s);
  std::size_t b = 0, e = chars.size();
  while (b < e && is_space(chars[b])) ++b;
  while (e > b && is_space(chars[e - 1])) --e;
  std::string out;
  for (std::size_t i = b; i < e; ++i) out += chars[i];
  return out;
}

// Tokenizes display text: whitespace-delimited words for English, one
// token per non-space character for Chinese.
inline std::vector<std::string> tokenize(std::string_view s, Lang lang) {
  std::vector<std::string> out;
  if (lang == Lang::zh) {
    for (auto& ch : utf8_chars(s))
      if (!is_space(ch)) out.push_back(std::move(ch));
    return out;
  }
  std::string cur;
  for (auto& ch : utf8_chars(s)) {
    if (is_space(ch)) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

inline std::string detokenize(const std::vector<std::string>& tokens, Lang lang) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0 && lang == Lang::en) out += ' ';
    out += tokens[i];
  }
  return out;
}

inline std::string lowercase_first(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(s[0])));
  return s;
}

// Returns the text between the last matched pair of quotation marks, if
// the response wraps its answer in quotes (e.g. He would say "We left").
// Straight single quotes only count at word boundaries so that
// apostrophes inside words are ignored.
inline std::optional<std::string> last_quoted_segment(std::string_view s) {
  const auto chars = utf8_chars(s);
  auto boundary_open = [&](std::size_t i) {
    return i == 0 || is_space(chars[i - 1]) || chars[i - 1] == ":" ||
           chars[i - 1] == "：";
  };
  auto boundary_close = [&](std::size_t i) {
    return i + 1 == chars.size() || is_space(chars[i + 1]) || is_punct(chars[i + 1]);
  };
  struct Pair {
    std::string_view open, close;
    bool word_boundary;
  };
  static constexpr std::array<Pair, 6> pairs = {{{"“", "”", false},
                                                 {"‘", "’", true},
                                                 {"「", "」", false},
                                                 {"『", "』", false},
                                                 {"\"", "\"", false},
                                                 {"'", "'", true}}};
  std::optional<std::pair<std::size_t, std::size_t>> best;
  for (const auto& p : pairs) {
    // Find the last closing mark, then the nearest opening mark before it.
    for (std::size_t c = chars.size(); c-- > 0;) {
      if (chars[c] != p.close || (p.word_boundary && !boundary_close(c))) continue;
      for (std::size_t o = c; o-- > 0;) {
        if (chars[o] != p.open || (p.word_boundary && !boundary_open(o))) continue;
        if (c > o + 1 && (!best || c > best->second)) best = std::make_pair(o, c);
        break;
      }
      break;
    }
  }
  if (!best) return std::nullopt;
  std::string out;
  for (std::size_t i = best->first + 1; i < best->second; ++i) out += chars[i];
  return out;
}

// Strips surrounding quotes and trailing punctuation, repeatedly.
inline std::string strip_decoration(std::string_view s) {
  auto chars = utf8_chars(trim(s));
  bool changed = true;
  while (changed && !chars.empty()) {
    changed = false;
    while (!chars.empty() && (is_punct(chars.back()) || is_space(chars.back()))) {
      chars.pop_back();
      changed = true;
    }
    while (!chars.empty() && (is_quote(chars.front()) || is_space(chars.front()))) {
      chars.erase(chars.begin());
      changed = true;
    }
  }
  std::string out;
  for (auto& c : chars) out += c;
  return out;
}

}  // namespace text
}  // namespace probe

#endif  // PROBE_TEXT_HPP
