#pragma once

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace fmicl::cli {

enum class Verb
{
  Verify,
  Train,
  Diagnose,
  Simplex,
  Sweep,
  Report
};

std::string
to_string(Verb verb);
//! Throws ConfigError on an unknown verb.
Verb
parse_verb(std::string_view token);

inline constexpr int kExitSuccess = 0;
inline constexpr int kExitCheckFailure = 1;
inline constexpr int kExitUsage = 2;

struct Command
{
  Verb verb{ Verb::Verify };
  //! Empty means built-in defaults only.
  std::filesystem::path config_path;
  std::filesystem::path output_dir{ "fmicl-out" };
  //! "key=value" with a dot path key; applied in order after everything else.
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

//! Every section with every key at its default value. A config file may only
//! set keys that appear here.
nlohmann::json
default_config();

//! Applies one "key=value" assignment. A dotted key is an absolute path. A bare
//! key resolves to the first of the verb's own section, "train", "data", and
//! the top level that contains it. The value is parsed as JSON, falling back to
//! a plain string, and must keep the kind (number, string, bool, array) of the
//! value it replaces. Throws ConfigError.
void
apply_override(nlohmann::json& config, Verb verb, std::string_view assignment);

//! Defaults, then the config file, then --seed and --threads, then the
//! overrides; the result is validated section by section. Throws ConfigError.
nlohmann::json
resolve_config(const Command& command);

//! Runs one verb and writes its artifacts into command.output_dir. Returns an
//! exit code; diagnostics go to `err`, a one-line summary to `out`.
int
run(const Command& command, std::ostream& out, std::ostream& err);

//! Parses argv (argv[0] is the program name) and runs the verb.
int
main_entry(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace fmicl::cli
