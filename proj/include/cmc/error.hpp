#pragma once
/// @file error.hpp
/// @brief Error categories shared by all modules.

#include <stdexcept>
#include <string>

namespace cmc {

enum class ErrorKind {
  InvalidCutoff,
  Divergence,
  Bracket,
  Domain,
  Consistency,
  Structural,
  Parameter,
  Configuration,
  Resolution,
  Resonance,
  Projection,
  FamilyRealization,
  Assembly,
  Io,
  Unsupported
};

const char* to_string(ErrorKind k);

/// @brief Exception carrying an ErrorKind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace cmc
