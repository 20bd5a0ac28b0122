#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

// Config-driven experiment runner. One JSON config file fully describes a
// run; the CLI only picks the file and may override the master seed, the
// output directory and the trial count. Every experiment validates its
// parameters before any compute starts, writes a summary.json plus CSV
// detail files into the output directory, prints a one-line summary and
// reports via the exit status whether its built-in assertions held.

namespace difflab::experiment {

// exit status 2
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
// exit status 1
struct RunError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CliOverrides {
    std::optional<uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<int> trials;
    bool dry_run = false;
    bool quiet = false;
};

// Runs (or, with dry_run, describes) the experiment in config_path.
// expected_kind, when nonempty, must match the config's "kind" field.
// Returns the process exit status: 0 on success, 1 when the experiment's
// built-in assertions fail. Configuration problems throw ConfigError,
// runtime failures RunError (the CLI maps them to 2 and 1).
int run_experiment_file(const std::string& config_path, const std::string& expected_kind,
                        const CliOverrides& overrides);

} // namespace difflab::experiment
