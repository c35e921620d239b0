#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace artemis {

enum class ErrorCode {
  Range,             // value outside its representable domain
  EncodingContract,  // stochastic operands fed in the wrong encoding roles
  Config,            // invalid or unsupported configuration
  Domain,            // mathematically undefined request (empty softmax, zero latency)
  Contract,          // caller violated a structural precondition
  Schedule,          // timeline cannot be scheduled (cycle, bad dependency)
  Parse,             // malformed input file
  Io,                // filesystem failure
};

std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace artemis
