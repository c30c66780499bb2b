#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace advcap {

// Base for every error raised by the library. Subclasses carry the category
// so callers can react to the ones they care about.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class LengthError : public Error {
 public:
  using Error::Error;
};

class DegenerateBatchError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class PairingError : public Error {
 public:
  using Error::Error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line == 0 ? what : what + " (line " + std::to_string(line) + ")"),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class ManifestError : public Error {
 public:
  using Error::Error;
};

class EmptyCorpusError : public Error {
 public:
  using Error::Error;
};

class CompatibilityError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, int epoch)
      : Error(what + " at epoch " + std::to_string(epoch)), epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

class TrialError : public Error {
 public:
  TrialError(const std::string& what, int trial)
      : Error("trial " + std::to_string(trial) + " failed: " + what), trial_(trial) {}
  int trial() const { return trial_; }

 private:
  int trial_;
};

}  // namespace advcap
