#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace wicketlens {

enum class ErrorKind {
  InvalidInput,
  InvalidParameter,
  InvalidRoi,
  Parse,
  Validation,
  Io,
  OcrEngine,
  Sequencing,
  Layout,
  EmptyInput,
  ExternalTool,
};

constexpr std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidInput: return "invalid-input";
    case ErrorKind::InvalidParameter: return "invalid-parameter";
    case ErrorKind::InvalidRoi: return "invalid-roi";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Validation: return "validation";
    case ErrorKind::Io: return "io";
    case ErrorKind::OcrEngine: return "ocr-engine";
    case ErrorKind::Sequencing: return "sequencing";
    case ErrorKind::Layout: return "layout";
    case ErrorKind::EmptyInput: return "empty-input";
    case ErrorKind::ExternalTool: return "external-tool";
  }
  return "unknown";
}

// All library failures surface as this exception; `kind()` drives CLI exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace wicketlens
