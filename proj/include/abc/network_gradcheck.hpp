#pragma once

#include <cstddef>
#include <cstdint>

// Options and results live outside namespace abc so the float64 twin library
// (built with abc renamed to abc_f64) shares them with the default build.
namespace abc_gradcheck {

struct NetworkCheckOptions {
  std::uint64_t seed = 0;
  double eps = 1e-3;
  /// Seeded coordinate sample per parameter tensor (and the input image).
  std::size_t coords_per_tensor = 16;
};

struct NetworkCheckResult {
  double max_error = 0.0;
  std::size_t tensors = 0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // coordinates whose +-eps probes changed a relu / maxpool branch
};

}  // namespace abc_gradcheck

namespace abc {

/// Central-difference check of d(sum of all logits)/d(every parameter and the
/// input) on a C=4, 16x16 network: He-initialized weights, biases in
/// [-0.1, 0.1], attention gates in [0.2, 0.8], deep supervision on.
abc_gradcheck::NetworkCheckResult network_grad_check(const abc_gradcheck::NetworkCheckOptions& options);

}  // namespace abc

namespace abc_f64 {

/// The same check on the float64 build of the engine and model.
abc_gradcheck::NetworkCheckResult network_grad_check(const abc_gradcheck::NetworkCheckOptions& options);

}  // namespace abc_f64
