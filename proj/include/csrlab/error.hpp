#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace csrlab {

enum class ErrorKind {
    alignment,
    empty_corpus,
    decode,
    parameter,
    format,
    parse,
    normalization,
    seeding,
    index,
    degenerate_batch,
    degenerate_corpus,
    divergence,
    pairing,
    config,
    io,
    usage,
};

// Stable lowercase names; the CLI prints these as the error category.
std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, const std::string &message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

  private:
    ErrorKind kind_;
};

} // namespace csrlab
