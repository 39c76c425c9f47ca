#pragma once

#include <stdexcept>
#include <string>

namespace justgen {

// Category attached to every library error.  The CLI maps InputError-flavored
// kinds to exit code 2 and Internal to exit code 3.
enum class ErrorKind {
  EmptyDocument,
  EmptyText,
  EmptyQuery,
  EmptyArticle,
  EmptyCorpus,
  EmptyReference,
  UnknownLabel,
  UnknownToken,
  NTooLarge,
  NoContexts,
  DimensionMismatch,
  LengthMismatch,
  InsufficientInstances,
  MissingArticle,
  MissingPredictions,
  InactiveLossRequested,
  InvalidConfig,
  MalformedInput,
  IoError,
  Internal,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace justgen
