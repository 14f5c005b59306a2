#pragma once

#include <stdexcept>
#include <string>

namespace xlabel {

// Malformed or inconsistent user input (files, flags, indices).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Unknown tag prefix or bad tag string in a BILOU/IOB2 sequence.
class CodecError : public InputError {
 public:
  CodecError(const std::string& what, std::size_t index)
      : InputError(what), index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

// A caller broke an operation's precondition (e.g. applying an invalid action).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// A scorer returned a probability outside (0, 1].
class ScorerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Internal invariant violated; indicates a bug rather than bad input.
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace xlabel
