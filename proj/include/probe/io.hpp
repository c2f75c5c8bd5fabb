#ifndef PROBE_IO_HPP
#define PROBE_IO_HPP

#include <unistd.h>

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "probe/error.hpp"

namespace probe {

using Json = nlohmann::ordered_json;

namespace io {

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Writes through a temporary file and renames it into place, so readers
// never observe a partial file.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  static std::atomic<std::uint64_t> counter{0};
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << content;
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

// Calls fn(line, line_number) for each non-blank line.
inline void for_each_line(const std::filesystem::path& path,
                          const std::function<void(const std::string&, std::size_t)>& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    fn(line, no);
  }
}

// Parses a JSON Lines file; decode errors and schema errors thrown by
// `fn` are re-raised with the file name and line number attached.
template <typename T>
std::vector<T> read_jsonl(const std::filesystem::path& path,
                          const std::function<T(const Json&)>& fn) {
  std::vector<T> out;
  for_each_line(path, [&](const std::string& line, std::size_t no) {
    const std::string where = path.string() + ":" + std::to_string(no);
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::exception& e) {
      throw FormatError(where + ": " + e.what());
    }
    try {
      out.push_back(fn(j));
    } catch (const Json::exception& e) {
      throw SchemaError(where + ": " + e.what());
    } catch (const Error& e) {
      throw FormatError(where + ": " + e.what());
    }
  });
  return out;
}

inline std::string to_jsonl(const std::vector<Json>& rows) {
  std::string out;
  for (const auto& r : rows) {
    out += r.dump();
    out += '\n';
  }
  return out;
}

// Fixed-precision number formatting for CSV and reports; keeps outputs
// byte-stable across runs.
inline std::string fmt_double(double v, int precision = 6) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(precision);
  os << v;
  return os.str();
}

}  // namespace io
}  // namespace probe

#endif  // PROBE_IO_HPP
