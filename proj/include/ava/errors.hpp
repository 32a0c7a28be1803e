#pragma once

#include <stdexcept>
#include <string>

namespace ava {

// Every library error carries a short machine-readable kind so the CLI can
// report it as a structured object.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define AVA_DEFINE_ERROR(Name, tag)                                  \
  class Name : public Error {                                        \
   public:                                                           \
    explicit Name(const std::string& message) : Error(tag, message) {} \
  };

AVA_DEFINE_ERROR(ShapeError, "shape")
AVA_DEFINE_ERROR(NumericError, "numeric")
AVA_DEFINE_ERROR(DomainError, "domain")
AVA_DEFINE_ERROR(FormatError, "format")
AVA_DEFINE_ERROR(VocabularyError, "vocabulary")
AVA_DEFINE_ERROR(ParseError, "parse")
AVA_DEFINE_ERROR(SchemaError, "schema")
AVA_DEFINE_ERROR(LengthError, "length")
AVA_DEFINE_ERROR(ConfigError, "config")
AVA_DEFINE_ERROR(SequenceTooShortError, "sequence_too_short")
AVA_DEFINE_ERROR(DivergenceError, "divergence")

#undef AVA_DEFINE_ERROR

}  // namespace ava
