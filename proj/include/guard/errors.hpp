#pragma once

#include <stdexcept>
#include <string>

namespace guard {

enum class Errc {
  EncodingError,
  ParamError,
  ShareError,
  CombineError,
  TableError,
  JoinError,
  ProofError,
  WrongSubject,
  BindingError,
  AuthError,
  UnknownIdentity,
  ProofRejected,
  AddressInUse,
  TimeoutError,
  Undeliverable,
  ConfigError,
  PhaseError,
  SchemaError,
};

const char* errc_name(Errc c);

/// Exception carrying one of the protocol error codes.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const { return code_; }

 private:
  Errc code_;
};

}  // namespace guard
