#pragma once

#include <stdexcept>
#include <string>

namespace pathnet {

/// Base class for every error raised by the library. `kind()` is a short
/// machine-readable tag used by the CLI error JSON.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what) : Error("shape", what) {}
};

class DatasetError : public Error {
 public:
  DatasetError(std::string record_id, std::string field, const std::string& what)
      : Error("dataset", "record '" + record_id + "', field '" + field + "': " + what),
        record_id_(std::move(record_id)),
        field_(std::move(field)) {}
  const std::string& record_id() const noexcept { return record_id_; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::string record_id_;
  std::string field_;
};

class FormatError : public Error {
 public:
  FormatError(std::string file, std::size_t line, const std::string& what)
      : Error("format", file + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Emits a warning line on stderr unless warnings are silenced.
void warn(const std::string& message);
void set_warnings_enabled(bool enabled);

}  // namespace pathnet
