#pragma once

#include <stdexcept>
#include <string>

namespace clens {

enum class Errc {
  InvalidLabel,
  Parse,
  UnknownClass,
  Domain,
  DegenerateNeuron,
  InstanceTooLarge,
  EmptyPool,
  Split,
  Io,
  Config,
};

const char* to_string(Errc code) noexcept;

// Every failure in the toolkit surfaces as an Error carrying one of the codes
// above; callers branch on code(), the message is for humans.
class Error : public std::runtime_error {
public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

private:
  Errc code_;
};

}  // namespace clens
