#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace crelab {

enum class ErrorKind {
  config,
  input,
  index,
  dataset,
  undefined_metric,
  pipeline,
  judge,
  load,
  report,
  io,
  backend,
  internal,
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& m) : Error(ErrorKind::config, m) {}
};

class InputError : public Error {
 public:
  explicit InputError(const std::string& m) : Error(ErrorKind::input, m) {}
};

class IndexError : public Error {
 public:
  explicit IndexError(const std::string& m) : Error(ErrorKind::index, m) {}
};

class DatasetError : public Error {
 public:
  explicit DatasetError(const std::string& m) : Error(ErrorKind::dataset, m) {}
};

class UndefinedMetricError : public Error {
 public:
  explicit UndefinedMetricError(const std::string& m)
      : Error(ErrorKind::undefined_metric, m) {}
};

class ReportError : public Error {
 public:
  explicit ReportError(const std::string& m) : Error(ErrorKind::report, m) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& m) : Error(ErrorKind::io, m) {}
};

class BackendError : public Error {
 public:
  explicit BackendError(const std::string& m) : Error(ErrorKind::backend, m) {}
};

class InternalError : public Error {
 public:
  explicit InternalError(const std::string& m) : Error(ErrorKind::internal, m) {}
};

/// Failure inside a multi-stage pipeline; `stage()` is 1-based.
class PipelineError : public Error {
 public:
  PipelineError(int stage, const std::string& m)
      : Error(ErrorKind::pipeline, "stage " + std::to_string(stage) + ": " + m),
        stage_(stage) {}

  int stage() const noexcept { return stage_; }

 private:
  int stage_;
};

/// A judge reply that could not be parsed. The raw reply is kept verbatim.
class JudgeError : public Error {
 public:
  JudgeError(const std::string& m, std::string raw_reply)
      : Error(ErrorKind::judge, m), raw_reply_(std::move(raw_reply)) {}

  const std::string& raw_reply() const noexcept { return raw_reply_; }

 private:
  std::string raw_reply_;
};

/// Schema or invariant violation while loading a file; `line()` is 1-based, 0 if unknown.
class LoadError : public Error {
 public:
  LoadError(std::size_t line, const std::string& m)
      : Error(ErrorKind::load,
              line ? "line " + std::to_string(line) + ": " + m : m),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace crelab
