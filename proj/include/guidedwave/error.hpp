#pragma once

#include <stdexcept>
#include <string>

namespace gw {

// Which stage raised the error. The CLI maps each kind to its own exit code.
enum class ErrorKind {
  config,
  io,
  dispersion,
  synthesis,
  dictionary,
  regression,
  onset,
  localisation,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return "config";
    case ErrorKind::io: return "io";
    case ErrorKind::dispersion: return "dispersion";
    case ErrorKind::synthesis: return "synth";
    case ErrorKind::dictionary: return "dictionary";
    case ErrorKind::regression: return "decompose";
    case ErrorKind::onset: return "onset";
    case ErrorKind::localisation: return "localise";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace gw
