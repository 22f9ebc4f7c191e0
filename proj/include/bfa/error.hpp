#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bfa {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed argument to an operation (dimension mismatch, bad label, zero direction).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

// Configuration that cannot be run (bad hyperparameters, degenerate data).
class InvalidConfig : public Error {
 public:
  using Error::Error;
};

// Caller broke an operation's precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class ShapeError : public Error {
 public:
  ShapeError(const std::string& what, std::size_t layer)
      : Error("layer " + std::to_string(layer) + ": " + what), layer_(layer) {}

  std::size_t layer() const noexcept { return layer_; }

 private:
  std::size_t layer_;
};

// A study ended up with nothing to aggregate.
class EmptyStudy : public Error {
 public:
  using Error::Error;
};

}  // namespace bfa
