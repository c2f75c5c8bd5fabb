#ifndef PROBE_TESTS_SUPPORT_HPP
#define PROBE_TESTS_SUPPORT_HPP

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <unistd.h>

#include "probe/bank.hpp"
#include "probe/rng.hpp"
#include "probe/tree.hpp"

namespace probe::support {

inline std::filesystem::path data_path(const std::string& name) {
  return std::filesystem::path(PROBE_DATA_DIR) / name;
}

inline SentenceBank fixture_bank(Lang lang) {
  return read_trees(data_path(lang == Lang::en ? "en.trees" : "zh.trees"), lang);
}

inline ConstituencyTree tree(const std::string& bracketed, Lang lang = Lang::en,
                             const std::string& id = "t") {
  return parse_bracketed(bracketed, lang, id);
}

// Uniformly split random binary tree over n placeholder tokens.
inline Node random_binary_node(int i, int j, Rng& rng) {
  Node n{j - i == 1 ? "W" : "X", {i, j}, {}};
  if (j - i == 1) return n;
  const int k = i + 1 + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(j - i - 1)));
  n.children.push_back(random_binary_node(i, k, rng));
  n.children.push_back(random_binary_node(k, j, rng));
  return n;
}

inline ConstituencyTree random_binary_tree(int n, Rng& rng) {
  ConstituencyTree t;
  t.sentence_id = "random";
  for (int i = 0; i < n; ++i) t.tokens.push_back("w" + std::to_string(i));
  t.root = random_binary_node(0, n, rng);
  return t;
}

// Every binary bracketing of [i, j), by brute force.
inline std::vector<Node> all_binary_nodes(int i, int j) {
  if (j - i == 1) return {Node{"W", {i, j}, {}}};
  std::vector<Node> out;
  for (int k = i + 1; k < j; ++k)
    for (const auto& l : all_binary_nodes(i, k))
      for (const auto& r : all_binary_nodes(k, j)) out.push_back(Node{"X", {i, j}, {l, r}});
  return out;
}

// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("probe-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace probe::support

#endif  // PROBE_TESTS_SUPPORT_HPP
