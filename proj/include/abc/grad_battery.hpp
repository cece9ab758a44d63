#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace abc {

struct GradCheckRow {
  std::string op;
  std::size_t instances = 0;
  double max_error = 0.0;
  bool passed = false;
  /// Reported but excluded from the overall verdict.
  bool informational = false;
  std::string note;
};

struct BatteryOptions {
  std::uint64_t seed = 0;
  std::size_t instances = 5;
  double tolerance = 1e-3;
  float eps = 1e-3f;
  bool include_network = true;
  /// Step of the end-to-end check, which runs on the float64 build.
  double network_eps = 1e-6;
  std::size_t network_coords_per_tensor = 16;
  /// Also run the end-to-end check in float32 as an informational row.
  bool report_float32_network = true;
};

/// Central-difference checks for every differentiable op on small random
/// float32 instances, plus an end-to-end check of a C=4, 16x16 network.
///
/// The end-to-end check gates on the float64 build of the same sources: in
/// float32 the rounding noise of a full forward pass, divided by 2 eps,
/// exceeds the tolerance for any usable eps.
std::vector<GradCheckRow> run_gradient_battery(const BatteryOptions& options);

}  // namespace abc
