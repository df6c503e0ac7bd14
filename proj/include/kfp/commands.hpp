#pragma once

/// @file commands.hpp
/// @brief The kfp subcommands as library calls.
///
/// Every command writes into one output directory and finishes with a
/// manifest.json listing the files it produced. Exit codes: 0 success or
/// pass, 1 usage or configuration error, 2 verification failure, 3 numerical
/// abort.

#include "kfp/config.hpp"

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>

namespace kfp {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitVerifyFail = 2,
  kExitNumerical = 3,
};

struct CommandOptions {
  std::optional<std::string> output_dir;  ///< overrides output.directory
  std::optional<std::string> resume;      ///< checkpoint to continue from
  std::optional<std::uint64_t> seed;      ///< echoed into the manifest
  std::optional<std::string> series;      ///< fit-rate input
};

std::string version_string();

int cmd_simulate(const RunConfig& config, const CommandOptions& options,
                 std::ostream& out, std::ostream& err);
int cmd_verify_lyapunov(const RunConfig& config, const CommandOptions& options,
                        std::ostream& out, std::ostream& err);
int cmd_fit_rate(const RunConfig& config, const CommandOptions& options,
                 std::ostream& out, std::ostream& err);
int cmd_steady_state(const RunConfig& config, const CommandOptions& options,
                     std::ostream& out, std::ostream& err);
int cmd_export_reference(const RunConfig& config, const CommandOptions& options,
                         std::ostream& out, std::ostream& err);

/// Writes a CertificateReport as `key = value` lines.
void write_certificate(std::ostream& out, const CertificateReport& report,
                       const ModelParams& params);

}  // namespace kfp
