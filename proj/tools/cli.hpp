#pragma once

// Command-line front end. `dispatch` is the whole program minus main(), so
// tests can drive it in-process.

#include <iosfwd>
#include <stdexcept>
#include <string>

namespace autores::cli {

inline constexpr const char* kArtifactVersion = "1.0.0";
inline constexpr int kManifestVersion = 1;

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitConfig = 2;

/// Invalid configuration; `field()` is the dotted path of the offending entry.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(std::move(field)) {}
  [[nodiscard]] const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Runs `argv[1]` as a subcommand. Returns 0 on success, 1 on runtime failure
/// and 2 on configuration errors.
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace autores::cli
