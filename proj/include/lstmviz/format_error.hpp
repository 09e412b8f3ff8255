#ifndef LSTMVIZ_FORMAT_ERROR_HPP
#define LSTMVIZ_FORMAT_ERROR_HPP

#include <stdexcept>
#include <string>

namespace lstmviz {

/// Malformed input file. `kind` distinguishes the failure for callers that
/// need to react differently.
class FormatError : public std::runtime_error {
 public:
  enum class Kind { bad_magic, truncated, count_mismatch, syntax };
  FormatError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

}  // namespace lstmviz

#endif  // LSTMVIZ_FORMAT_ERROR_HPP
