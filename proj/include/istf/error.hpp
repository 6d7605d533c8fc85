#pragma once

#include <stdexcept>
#include <string>

namespace istf {

// All library errors carry a stable category used by the CLI for its
// "error:<category>: message" exit line.
class Error : public std::runtime_error {
 public:
  Error(std::string category, const std::string& message)
      : std::runtime_error(message), category_(std::move(category)) {}

  const std::string& category() const { return category_; }

 private:
  std::string category_;
};

struct ShapeError : Error {
  explicit ShapeError(const std::string& m) : Error("shape", m) {}
};

struct ContractError : Error {
  explicit ContractError(const std::string& m) : Error("contract", m) {}
};

struct MaskError : Error {
  explicit MaskError(const std::string& m) : Error("mask", m) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& m) : Error("config", m) {}
};

struct DataError : Error {
  explicit DataError(const std::string& m) : Error("data", m) {}
};

struct SchemaError : Error {
  explicit SchemaError(const std::string& m) : Error("schema", m) {}
};

struct MetricError : Error {
  explicit MetricError(const std::string& m) : Error("metric", m) {}
};

struct IoError : Error {
  explicit IoError(const std::string& m) : Error("io", m) {}
};

struct CheckpointError : Error {
  explicit CheckpointError(const std::string& m) : Error("checkpoint", m) {}
};

}  // namespace istf
