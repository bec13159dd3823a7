#pragma once

#include <stdexcept>
#include <string>

namespace opseq {

// Base of every error raised by the library. exit_code() maps onto the CLI's
// process exit status: 1 config, 2 data, 3 numeric.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept = 0;
};

class ConfigError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 1; }
};

class DataError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

class NumericError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

// Re-throws the active opseq::Error with "[stage, sample]" prepended while
// keeping its concrete type. Call only from inside a catch block.
[[noreturn]] inline void rethrow_with_context(const Error& e, const std::string& stage,
                                              const std::string& sample_id = {}) {
  std::string where = "[" + stage;
  if (!sample_id.empty()) where += ", sample " + sample_id;
  where += "] ";
  const std::string msg = where + e.what();
  if (dynamic_cast<const ConfigError*>(&e)) throw ConfigError(msg);
  if (dynamic_cast<const NumericError*>(&e)) throw NumericError(msg);
  throw DataError(msg);
}

}  // namespace opseq
