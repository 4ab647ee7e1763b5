// Copyright 2026 The mirage Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace mirage {

/// Base of every error raised by the library. `kind()` is a stable short tag
/// used by the CLI to map failures onto exit codes and messages.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(kind + " error: " + what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define MIRAGE_DEFINE_ERROR(Name, tag)                                        \
  class Name : public Error {                                                 \
   public:                                                                    \
    explicit Name(const std::string& what) : Error(tag, what) {}              \
  };

MIRAGE_DEFINE_ERROR(ShapeError, "shape")
MIRAGE_DEFINE_ERROR(LoadError, "load")
MIRAGE_DEFINE_ERROR(BoundsError, "bounds")
MIRAGE_DEFINE_ERROR(ConfigError, "config")
MIRAGE_DEFINE_ERROR(ContractError, "contract")
MIRAGE_DEFINE_ERROR(DegeneracyError, "degeneracy")
MIRAGE_DEFINE_ERROR(VisibilityError, "visibility")
MIRAGE_DEFINE_ERROR(InputError, "input")
MIRAGE_DEFINE_ERROR(NumericError, "numeric")
MIRAGE_DEFINE_ERROR(IoError, "io")

#undef MIRAGE_DEFINE_ERROR

}  // namespace mirage
