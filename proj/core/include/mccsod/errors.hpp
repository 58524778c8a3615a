#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace mccsod {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shapes or channel counts disagree with what an operation requires.
class DimensionError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// A named array expected in an archive is absent.
class MissingWeightError : public Error {
 public:
  using Error::Error;
};

// An object is used before it holds what it needs (e.g. no parameters loaded).
class StateError : public Error {
 public:
  using Error::Error;
};

class ContractError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Loss or gradient became non-finite during optimization.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Image/ground-truth (or prediction/ground-truth) files could not be matched by stem.
class PairingError : public Error {
 public:
  PairingError(const std::string& what, std::vector<std::string> stems)
      : Error(what), stems_(std::move(stems)) {}

  const std::vector<std::string>& stems() const noexcept { return stems_; }

 private:
  std::vector<std::string> stems_;
};

}  // namespace mccsod
