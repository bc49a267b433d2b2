#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace charstory {

/// Root of every error the toolkit throws. The CLI maps subclasses onto
/// process exit codes (see cli.hpp).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A file could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Base for malformed input. `line()` is 1-based, 0 when not line oriented.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t line = 0)
      : Error(line ? what + " (line " + std::to_string(line) + ")" : what),
        detail_(what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }
  /// Message without the line suffix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::string detail_;
  std::size_t line_;
};

/// Malformed WordNet database record.
class ParseError : public FormatError {
 public:
  using FormatError::FormatError;
};

/// The database lacks the lemmas needed to resolve the person/animal roots.
class LexiconIncomplete : public Error {
 public:
  using Error::Error;
};

class UnknownSynset : public Error {
 public:
  using Error::Error;
};

/// A word has no noun base form in the lexicon.
class NotInLexicon : public Error {
 public:
  explicit NotInLexicon(const std::string& word)
      : Error("no noun base form for '" + word + "'"), word_(word) {}
  const std::string& word() const noexcept { return word_; }

 private:
  std::string word_;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// A story lacks features or a semantic vector at training time.
class DataJoinError : public Error {
 public:
  DataJoinError(const std::string& story_id, const std::string& what)
      : Error("story '" + story_id + "': " + what), story_id_(story_id) {}
  const std::string& story_id() const noexcept { return story_id_; }

 private:
  std::string story_id_;
};

class IncompatibleCheckpoint : public Error {
 public:
  using Error::Error;
};

}  // namespace charstory
