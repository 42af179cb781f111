#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace nestmax {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitNumerical = 4;

struct CommandIo {
  std::string config_path;
  std::string data_path;
  std::string chain_path;
  std::string margins_path;
  std::string out_dir;  // overrides config output_dir when non-empty
  std::optional<std::uint64_t> seed;
  int chains = 1;
  int workers = 0;  // 0: leave the OpenMP default
  bool unit_frechet = false;
};

int cmd_simulate(const CommandIo& io);
int cmd_fit(const CommandIo& io);
int cmd_extremal(const CommandIo& io);
int cmd_diagnose(const CommandIo& io);
int cmd_predict(const CommandIo& io);

}  // namespace nestmax
