#ifndef PROBE_ERROR_HPP
#define PROBE_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace probe {

// Base for every data error raised by the toolkit. The CLI maps these to
// exit status 1; usage errors never derive from this type.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(kind + ": " + what), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define PROBE_DEFINE_ERROR(Name)                                   \
  class Name : public Error {                                      \
   public:                                                         \
    explicit Name(const std::string& what) : Error(#Name, what) {} \
  };

// treebank
PROBE_DEFINE_ERROR(SpanNotANode)
PROBE_DEFINE_ERROR(NotBinary)
// taskgen
PROBE_DEFINE_ERROR(EmptyPool)
PROBE_DEFINE_ERROR(InsufficientPool)
PROBE_DEFINE_ERROR(UnknownSentence)
PROBE_DEFINE_ERROR(FormatError)
PROBE_DEFINE_ERROR(PoolError)
PROBE_DEFINE_ERROR(UnknownTemplate)
// participants
PROBE_DEFINE_ERROR(TransportError)
PROBE_DEFINE_ERROR(SpecError)
PROBE_DEFINE_ERROR(SchemaError)
PROBE_DEFINE_ERROR(UnknownTrial)
// analysis
PROBE_DEFINE_ERROR(EmptyGroup)
PROBE_DEFINE_ERROR(NoConstituentTests)
PROBE_DEFINE_ERROR(MissingTargetSpan)
// reconstruct
PROBE_DEFINE_ERROR(LengthMismatch)
PROBE_DEFINE_ERROR(EmptyList)
// stats
PROBE_DEFINE_ERROR(SizeMismatch)
PROBE_DEFINE_ERROR(TooFewSamples)
PROBE_DEFINE_ERROR(InvalidP)
PROBE_DEFINE_ERROR(ShapeError)
PROBE_DEFINE_ERROR(DegenerateError)
// io
PROBE_DEFINE_ERROR(IoError)

#undef PROBE_DEFINE_ERROR

class ParseError : public Error {
 public:
  ParseError(std::size_t position, const std::string& reason)
      : Error("ParseError", "at " + std::to_string(position) + ": " + reason),
        position_(position),
        reason_(reason) {}

  std::size_t position() const noexcept { return position_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::size_t position_;
  std::string reason_;
};

class ApiError : public Error {
 public:
  ApiError(int status, std::string body)
      : Error("ApiError", "HTTP " + std::to_string(status) + ": " + body),
        status_(status),
        body_(std::move(body)) {}

  int status() const noexcept { return status_; }
  const std::string& body() const noexcept { return body_; }

 private:
  int status_;
  std::string body_;
};

class DuplicateResponse : public Error {
 public:
  explicit DuplicateResponse(std::vector<std::string> trial_ids)
      : Error("DuplicateResponse", join(trial_ids)), trial_ids_(std::move(trial_ids)) {}

  const std::vector<std::string>& trial_ids() const noexcept { return trial_ids_; }

 private:
  static std::string join(const std::vector<std::string>& ids) {
    std::string out;
    for (const auto& id : ids) {
      if (!out.empty()) out += ", ";
      out += id;
    }
    return out;
  }

  std::vector<std::string> trial_ids_;
};

}  // namespace probe

#endif  // PROBE_ERROR_HPP
