#ifndef PROBE_TREE_HPP
#define PROBE_TREE_HPP

#include <algorithm>
#include <compare>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "probe/error.hpp"
#include "probe/text.hpp"

namespace probe {

// Half-open token interval [start, end).
struct Span {
  int start = 0;
  int end = 0;

  int length() const { return end - start; }
  bool contains(const Span& o) const { return start <= o.start && o.end <= end; }
  bool crosses(const Span& o) const {
    return (start < o.start && o.start < end && end < o.end) ||
           (o.start < start && start < o.end && o.end < end);
  }

  friend auto operator<=>(const Span&, const Span&) = default;
};

inline std::string to_string(const Span& s) {
  return "[" + std::to_string(s.start) + "," + std::to_string(s.end) + ")";
}

using SpanSet = std::set<Span>;

// A labeled node. Leaves are preterminals: their category is the POS tag
// and their span covers exactly one token.
struct Node {
  std::string category;
  Span span;
  std::vector<Node> children;

  bool is_leaf() const { return children.empty(); }

  friend bool operator==(const Node&, const Node&) = default;
};

struct ConstituencyTree {
  std::string sentence_id;
  Lang lang = Lang::en;
  std::vector<std::string> tokens;
  Node root;

  int size() const { return static_cast<int>(tokens.size()); }

  friend bool operator==(const ConstituencyTree&, const ConstituencyTree&) = default;
};

// Strips the binarization primes: "VP''" -> "VP".
inline std::string_view base_category(std::string_view label) {
  while (!label.empty() && label.back() == '\'') label.remove_suffix(1);
  return label;
}

inline bool same_category(std::string_view a, std::string_view b) {
  return base_category(a) == base_category(b);
}

// PTB function tags and coindexing are dropped: "NP-SBJ-1" -> "NP",
// "NP=2" -> "NP". Labels that start with '-' (-NONE-, -LRB-) are kept.
inline std::string normalize_label(std::string_view label) {
  if (label.empty() || label.front() == '-') return std::string(label);
  const auto cut = label.find_first_of("-=");
  return std::string(cut == std::string_view::npos ? label : label.substr(0, cut));
}

namespace detail {

struct Lexeme {
  enum Kind { open, close, atom, end } kind;
  std::string text;
  std::size_t pos;
};

class BracketLexer {
 public:
  explicit BracketLexer(std::string_view s) : s_(s) {}

  Lexeme next() {
    while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) ++i_;
    if (i_ >= s_.size()) return {Lexeme::end, "", i_};
    const std::size_t at = i_;
    if (s_[i_] == '(') return ++i_, Lexeme{Lexeme::open, "(", at};
    if (s_[i_] == ')') return ++i_, Lexeme{Lexeme::close, ")", at};
    while (i_ < s_.size() && s_[i_] != '(' && s_[i_] != ')' &&
           !std::isspace(static_cast<unsigned char>(s_[i_])))
      ++i_;
    return {Lexeme::atom, std::string(s_.substr(at, i_ - at)), at};
  }

  Lexeme peek() {
    const auto save = i_;
    auto l = next();
    i_ = save;
    return l;
  }

 private:
  std::string_view s_;
  std::size_t i_ = 0;
};

class BracketParser {
 public:
  BracketParser(std::string_view text, Lang lang) : lex_(text), lang_(lang) {}

  ConstituencyTree parse() {
    auto first = lex_.next();
    if (first.kind != Lexeme::open) throw ParseError(first.pos, "expected '('");
    Node root = parse_node(first.pos, /*allow_empty_label=*/true);
    auto tail = lex_.next();
    if (tail.kind != Lexeme::end) throw ParseError(tail.pos, "trailing input after tree");
    // PTB wraps each tree in an unlabeled bracket: "( (S ...) )".
    while (root.category.empty()) {
      if (root.children.size() != 1) throw ParseError(0, "empty label");
      Node inner = std::move(root.children.front());
      root = std::move(inner);
    }
    ConstituencyTree tree;
    tree.lang = lang_;
    tree.tokens = std::move(tokens_);
    tree.root = std::move(root);
    return tree;
  }

 private:
  // Called after consuming '('.
  Node parse_node(std::size_t open_pos, bool allow_empty_label) {
    Node node;
    auto l = lex_.next();
    if (l.kind == Lexeme::atom) {
      node.category = normalize_label(l.text);
      l = lex_.next();
    } else if (!allow_empty_label) {
      throw ParseError(l.pos, "empty label");
    }
    if (l.kind == Lexeme::end) throw ParseError(l.pos, "unbalanced parentheses");
    if (l.kind == Lexeme::close) {
      throw ParseError(l.pos, node.category.empty() ? "empty node" : "empty leaf");
    }
    if (l.kind == Lexeme::atom) {
      if (node.category.empty()) throw ParseError(open_pos, "empty label");
      auto close = lex_.next();
      if (close.kind == Lexeme::end) throw ParseError(close.pos, "unbalanced parentheses");
      if (close.kind != Lexeme::close)
        throw ParseError(close.pos, "leaf must hold exactly one surface form");
      return make_leaf(std::move(node.category), l.text);
    }
    // l is '(' : a sequence of child nodes.
    const int start = static_cast<int>(tokens_.size());
    while (true) {
      node.children.push_back(parse_node(l.pos, false));
      l = lex_.next();
      if (l.kind == Lexeme::close) break;
      if (l.kind == Lexeme::end) throw ParseError(l.pos, "unbalanced parentheses");
      if (l.kind == Lexeme::atom) throw ParseError(l.pos, "surface form mixed with subtrees");
    }
    node.span = {start, static_cast<int>(tokens_.size())};
    return node;
  }

  Node make_leaf(std::string pos_tag, const std::string& surface) {
    const int start = static_cast<int>(tokens_.size());
    if (lang_ == Lang::en) {
      tokens_.push_back(surface);
      return Node{std::move(pos_tag), {start, start + 1}, {}};
    }
    // Chinese tokens are characters: a multi-character word becomes a node
    // over one leaf per character, all carrying the word's POS tag.
    auto chars = text::utf8_chars(surface);
    if (chars.size() == 1) {
      tokens_.push_back(chars.front());
      return Node{std::move(pos_tag), {start, start + 1}, {}};
    }
    Node word{pos_tag, {start, start + static_cast<int>(chars.size())}, {}};
    for (auto& ch : chars) {
      const int i = static_cast<int>(tokens_.size());
      tokens_.push_back(std::move(ch));
      word.children.push_back(Node{pos_tag, {i, i + 1}, {}});
    }
    return word;
  }

  BracketLexer lex_;
  Lang lang_;
  std::vector<std::string> tokens_;
};

inline void write_bracketed(const Node& n, const std::vector<std::string>& tokens,
                            std::string& out) {
  out += '(';
  out += n.category;
  if (n.is_leaf()) {
    out += ' ';
    out += tokens[static_cast<std::size_t>(n.span.start)];
  } else {
    for (const auto& c : n.children) {
      out += ' ';
      write_bracketed(c, tokens, out);
    }
  }
  out += ')';
}

inline void reindex(Node& n, int& next) {
  if (n.is_leaf()) {
    n.span = {next, next + 1};
    ++next;
    return;
  }
  const int start = next;
  for (auto& c : n.children) reindex(c, next);
  n.span = {start, next};
}

}  // namespace detail

/// Parses one PTB/CTB-style bracketed tree. Leaves are "(POS surface)".
/// For Chinese, multi-character surfaces are split into character tokens.
inline ConstituencyTree parse_bracketed(std::string_view text, Lang lang,
                                        std::string sentence_id = {}) {
  auto tree = detail::BracketParser(text, lang).parse();
  tree.sentence_id = std::move(sentence_id);
  return tree;
}

/// Serializes a tree. Chinese character leaves are written individually,
/// so re-parsing yields the same tree.
inline std::string to_bracketed(const ConstituencyTree& tree) {
  std::string out;
  detail::write_bracketed(tree.root, tree.tokens, out);
  return out;
}

inline std::string to_bracketed(const Node& node, const std::vector<std::string>& tokens) {
  std::string out;
  detail::write_bracketed(node, tokens, out);
  return out;
}

// Visits every node in preorder with its parent (nullptr for the root) and
// its depth in edges from the root.
inline void visit(const Node& root,
                  const std::function<void(const Node&, const Node*, int)>& fn) {
  struct Frame {
    const Node* node;
    const Node* parent;
    int depth;
  };
  std::vector<Frame> stack{{&root, nullptr, 0}};
  while (!stack.empty()) {
    auto f = stack.back();
    stack.pop_back();
    fn(*f.node, f.parent, f.depth);
    for (auto it = f.node->children.rbegin(); it != f.node->children.rend(); ++it)
      stack.push_back({&*it, f.node, f.depth + 1});
  }
}

/// Checks every structural invariant; throws FormatError on the first
/// violation.
inline void validate(const ConstituencyTree& tree) {
  const int n = tree.size();
  if (n == 0) throw FormatError("tree has no tokens");
  if (tree.root.span != Span{0, n}) throw FormatError("root span does not cover sentence");
  for (const auto& t : tree.tokens) {
    if (t.empty()) throw FormatError("empty token");
    for (const auto& ch : text::utf8_chars(t))
      if (text::is_space(ch)) throw FormatError("token contains whitespace");
  }
  visit(tree.root, [&](const Node& node, const Node*, int) {
    if (node.category.empty()) throw FormatError("empty category");
    if (node.is_leaf()) {
      if (node.span.length() != 1) throw FormatError("leaf span is not one token");
      return;
    }
    int at = node.span.start;
    for (const auto& c : node.children) {
      if (c.span.start != at) throw FormatError("children do not tile parent span");
      at = c.span.end;
    }
    if (at != node.span.end) throw FormatError("children do not tile parent span");
  });
}

struct ConstituentInfo {
  Span span;
  std::string category;
  std::optional<std::string> parent_category;  // nullopt for the root

  friend auto operator<=>(const ConstituentInfo&, const ConstituentInfo&) = default;
};

struct TreeMetrics {
  int depth = 0;       // edges from root to the farthest word
  int n_nodes = 0;     // labeled nodes, preterminals included
  int n_internal = 0;  // nodes above the preterminals
  std::vector<ConstituentInfo> constituent_spans;  // preorder
};

/// Depth counts the edge from each preterminal down to its word, so
/// (S (NP (PRP She)) ...) has depth 3 along the subject path.
inline TreeMetrics tree_metrics(const ConstituencyTree& tree) {
  TreeMetrics m;
  visit(tree.root, [&](const Node& node, const Node* parent, int depth) {
    ++m.n_nodes;
    if (!node.is_leaf()) ++m.n_internal;
    else m.depth = std::max(m.depth, depth + 1);
    m.constituent_spans.push_back(
        {node.span, node.category,
         parent ? std::optional<std::string>(parent->category) : std::nullopt});
  });
  return m;
}

inline int depth(const ConstituencyTree& tree) { return tree_metrics(tree).depth; }

/// Distinct node spans; unary chains contribute one span.
inline SpanSet node_spans(const ConstituencyTree& tree) {
  SpanSet out;
  visit(tree.root, [&](const Node& n, const Node*, int) { out.insert(n.span); });
  return out;
}

inline bool is_node_span(const ConstituencyTree& tree, const Span& s) {
  bool found = false;
  visit(tree.root, [&](const Node& n, const Node*, int) { found = found || n.span == s; });
  return found;
}

/// (category, parent category) of every node with the given span, topmost
/// first. Empty when the span is not a node.
inline std::vector<ConstituentInfo> nodes_at(const ConstituencyTree& tree, const Span& s) {
  std::vector<ConstituentInfo> out;
  visit(tree.root, [&](const Node& n, const Node* parent, int) {
    if (n.span == s)
      out.push_back({n.span, n.category,
                     parent ? std::optional<std::string>(parent->category) : std::nullopt});
  });
  return out;
}

enum class Relation { direct_child, descendant, none };

inline std::string to_string(Relation r) {
  switch (r) {
    case Relation::direct_child: return "direct_child";
    case Relation::descendant: return "descendant";
    default: return "none";
  }
}

/// Relation of the node at span `a` to the node at span `b`. Where unary
/// chains put several nodes on one span, any pair of nodes counts; equal
/// spans are never related.
inline Relation relation(const ConstituencyTree& tree, const Span& a, const Span& b) {
  if (!is_node_span(tree, a)) throw SpanNotANode(to_string(a));
  if (!is_node_span(tree, b)) throw SpanNotANode(to_string(b));
  if (a == b || !b.contains(a)) return Relation::none;
  bool direct = false;
  visit(tree.root, [&](const Node& n, const Node* parent, int) {
    if (n.span == a && parent && parent->span == b) direct = true;
  });
  // Spans nest strictly, so a proper sub-span that is a node lies below b.
  return direct ? Relation::direct_child : Relation::descendant;
}

namespace detail {

inline Node binarize_node(const Node& n) {
  if (n.is_leaf()) return n;
  Node out{n.category, n.span, {}};
  if (n.children.size() <= 2) {
    for (const auto& c : n.children) out.children.push_back(binarize_node(c));
    return out;
  }
  // (A c1 c2 ... ck) -> (A c1 (A' c2 (A' ... ck)))
  const std::string primed = std::string(base_category(n.category)) + "'";
  Node* cur = &out;
  for (std::size_t i = 0; i < n.children.size(); ++i) {
    const bool last_pair = i + 2 == n.children.size();
    cur->children.push_back(binarize_node(n.children[i]));
    if (last_pair) {
      cur->children.push_back(binarize_node(n.children[i + 1]));
      break;
    }
    Span rest{n.children[i + 1].span.start, n.span.end};
    cur->children.push_back(Node{primed, rest, {}});
    cur = &cur->children.back();
  }
  return out;
}

inline Node collapse_unary_node(const Node& n) {
  const Node* cur = &n;
  while (cur->children.size() == 1) cur = &cur->children.front();
  if (cur->is_leaf()) return *cur;
  Node out{n.category, n.span, {}};
  for (const auto& c : cur->children) out.children.push_back(collapse_unary_node(c));
  return out;
}

inline Node mirror_node(const Node& n, int len) {
  Node out{n.category, {len - n.span.end, len - n.span.start}, {}};
  for (auto it = n.children.rbegin(); it != n.children.rend(); ++it)
    out.children.push_back(mirror_node(*it, len));
  return out;
}

}  // namespace detail

/// Right-binarizes nodes with more than two children; intermediate nodes
/// carry the parent label with a prime. Unary nodes are kept.
inline ConstituencyTree binarize(const ConstituencyTree& tree) {
  ConstituencyTree out = tree;
  out.root = detail::binarize_node(tree.root);
  return out;
}

/// Removes unary chains. A chain ending at a preterminal collapses into
/// the preterminal; other chains keep the topmost label.
inline ConstituencyTree collapse_unary(const ConstituencyTree& tree) {
  ConstituencyTree out = tree;
  out.root = detail::collapse_unary_node(tree.root);
  return out;
}

inline bool is_strictly_binary(const ConstituencyTree& tree) {
  bool ok = true;
  visit(tree.root, [&](const Node& n, const Node*, int) {
    ok = ok && (n.is_leaf() || n.children.size() == 2);
  });
  return ok;
}

/// Swaps the children of every node and reverses the token order.
inline ConstituencyTree mirror(const ConstituencyTree& tree) {
  ConstituencyTree out = tree;
  std::reverse(out.tokens.begin(), out.tokens.end());
  out.root = detail::mirror_node(tree.root, tree.size());
  return out;
}

/// Removes every leaf matching `drop` and any node left without children.
/// Returns nullopt if nothing remains.
inline std::optional<ConstituencyTree> prune_leaves(
    const ConstituencyTree& tree, const std::function<bool(const Node&)>& drop) {
  std::function<std::optional<Node>(const Node&)> prune =
      [&](const Node& n) -> std::optional<Node> {
    if (n.is_leaf()) return drop(n) ? std::nullopt : std::optional<Node>(n);
    Node out{n.category, n.span, {}};
    for (const auto& c : n.children)
      if (auto kept = prune(c)) out.children.push_back(std::move(*kept));
    if (out.children.empty()) return std::nullopt;
    return out;
  };
  auto root = prune(tree.root);
  if (!root) return std::nullopt;
  ConstituencyTree out;
  out.sentence_id = tree.sentence_id;
  out.lang = tree.lang;
  visit(*root, [&](const Node& n, const Node*, int) {
    if (n.is_leaf()) out.tokens.push_back(tree.tokens[static_cast<std::size_t>(n.span.start)]);
  });
  int next = 0;
  detail::reindex(*root, next);
  out.root = std::move(*root);
  return out;
}

// Exact non-negative rational; den == 0 encodes +infinity.
struct Ratio {
  std::uint64_t num = 0;
  std::uint64_t den = 1;

  static Ratio make(std::uint64_t num, std::uint64_t den) {
    if (den == 0) return {1, 0};
    const auto g = std::gcd(num, den);
    return g ? Ratio{num / g, den / g} : Ratio{0, 1};
  }

  bool is_infinite() const { return den == 0; }
  double value() const {
    return is_infinite() ? std::numeric_limits<double>::infinity()
                         : static_cast<double>(num) / static_cast<double>(den);
  }
  Ratio reciprocal() const { return make(den, num); }

  friend bool operator==(const Ratio&, const Ratio&) = default;
};

/// Total right descendants over total left descendants, leaves included.
/// Infinite for a one-token tree.
inline Ratio balance_factor(const ConstituencyTree& tree) {
  std::uint64_t left = 0, right = 0;
  std::function<std::uint64_t(const Node&)> count = [&](const Node& n) -> std::uint64_t {
    if (n.is_leaf()) return 1;
    if (n.children.size() != 2)
      throw NotBinary("node " + n.category + " " + to_string(n.span) + " has " +
                      std::to_string(n.children.size()) + " children");
    const auto l = count(n.children[0]);
    const auto r = count(n.children[1]);
    left += l;
    right += r;
    return 1 + l + r;
  };
  count(tree.root);
  return Ratio::make(right, left);
}

/// Graphviz rendering for inspection.
inline std::string to_dot(const ConstituencyTree& tree) {
  std::ostringstream os;
  auto quote = [](const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
      if (c == '"' || c == '\\') out += '\\';
      out += c;
    }
    return out + "\"";
  };
  os << "digraph " << quote(tree.sentence_id.empty() ? "tree" : tree.sentence_id) << " {\n";
  os << "  node [shape=plaintext];\n";
  int next_id = 0;
  std::function<int(const Node&)> emit = [&](const Node& n) {
    const int id = next_id++;
    os << "  n" << id << " [label=" << quote(n.category) << "];\n";
    if (n.is_leaf()) {
      const int w = next_id++;
      os << "  n" << w << " [label=" << quote(tree.tokens[static_cast<std::size_t>(n.span.start)])
         << ", fontcolor=blue];\n";
      os << "  n" << id << " -> n" << w << ";\n";
    }
    for (const auto& c : n.children) {
      const int cid = emit(c);
      os << "  n" << id << " -> n" << cid << ";\n";
    }
    return id;
  };
  emit(tree.root);
  os << "}\n";
  return os.str();
}

}  // namespace probe

#endif  // PROBE_TREE_HPP
