#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace uicws {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input data (corpus, lexicon, embeddings, checkpoint) could not be used.
class DataError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

namespace detail {
inline std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}
}  // namespace detail

class ShapeMismatch : public Error {
 public:
  ShapeMismatch(const std::string& op, const std::vector<std::size_t>& lhs,
                const std::vector<std::size_t>& rhs)
      : Error(op + ": shape mismatch " + detail::shape_string(lhs) + " vs " +
              detail::shape_string(rhs)) {}
  explicit ShapeMismatch(const std::string& what) : Error(what) {}
};

class NotScalar : public Error {
 public:
  explicit NotScalar(const std::vector<std::size_t>& shape)
      : Error("backward: loss is not a scalar, shape " + detail::shape_string(shape)) {}
};

class WordTooLong : public DataError {
 public:
  explicit WordTooLong(const std::string& words)
      : DataError("lexicon words longer than 4 characters: " + words) {}
};

class EmptyWord : public DataError {
 public:
  EmptyWord() : DataError("lexicon contains an empty word") {}
};

class ParseError : public DataError {
 public:
  ParseError(std::size_t line, const std::string& reason)
      : DataError("line " + std::to_string(line) + ": " + reason), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class IllegalTagSequence : public DataError {
 public:
  IllegalTagSequence(std::size_t sentence_index, std::size_t position, const std::string& detail = {})
      : DataError("illegal BIOES sequence in sentence " + std::to_string(sentence_index) +
                  " at position " + std::to_string(position) + (detail.empty() ? "" : ": " + detail)),
        sentence_index_(sentence_index),
        position_(position) {}
  std::size_t sentence_index() const noexcept { return sentence_index_; }
  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t sentence_index_;
  std::size_t position_;
};

class OverlappingSpans : public DataError {
 public:
  explicit OverlappingSpans(const std::string& what) : DataError("overlapping or out-of-range spans: " + what) {}
};

class DimMismatch : public DataError {
 public:
  DimMismatch(std::size_t found, std::size_t expected)
      : DataError("embedding dimension " + std::to_string(found) + " does not match expected " +
                  std::to_string(expected)),
        found_(found),
        expected_(expected) {}
  std::size_t found() const noexcept { return found_; }
  std::size_t expected() const noexcept { return expected_; }

 private:
  std::size_t found_;
  std::size_t expected_;
};

class MalformedLine : public DataError {
 public:
  MalformedLine(std::size_t line, const std::string& reason)
      : DataError("malformed embedding line " + std::to_string(line) + ": " + reason), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class IllegalGoldSequence : public DataError {
 public:
  explicit IllegalGoldSequence(std::size_t position)
      : DataError("gold tag sequence violates transition constraints at position " + std::to_string(position)) {}
};

class NonFiniteLoss : public Error {
 public:
  explicit NonFiniteLoss(std::size_t batch_index)
      : Error("non-finite loss in batch " + std::to_string(batch_index)), batch_index_(batch_index) {}
  std::size_t batch_index() const noexcept { return batch_index_; }

 private:
  std::size_t batch_index_;
};

class CheckpointError : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace uicws
