#pragma once

#include <string>
#include <vector>

namespace dexw {

struct OracleCheck {
  std::string name;
  double error{0.0};
  double tolerance{0.0};
  bool passed{false};
};

/// Closed-form cross-checks of the simulator: Rabi flopping, free
/// precession, IRF attenuation, period/splitting, polarization round trips.
std::vector<OracleCheck> run_oracles();

std::string format_oracle_table(const std::vector<OracleCheck>& checks);

}  // namespace dexw
