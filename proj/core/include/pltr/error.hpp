#pragma once

#include <stdexcept>
#include <string>

namespace pltr {

/// Input data or arguments that violate a documented precondition.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed external input (CoNLL text, JSON, checkpoint bytes).
class ParseError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// A required input file or resource could not be opened.
class MissingInputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training diverged (non-finite loss) or otherwise failed mid-run.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace pltr
