#include "abc/network_gradcheck.hpp"

#include "abc/gradcheck.hpp"
#include "abc/network.hpp"
#include "abc/ops.hpp"
#include "abc/random.hpp"

namespace abc {

abc_gradcheck::NetworkCheckResult network_grad_check(const abc_gradcheck::NetworkCheckOptions& options) {
  AbcConfig cfg;
  cfg.input_dim = 4;
  cfg.height = 16;
  cfg.width = 16;
  Rng rng(options.seed);
  AbcNet net(cfg, rng.next());
  for (Clft* block : net.clft_blocks()) block->alpha.mutable_data()[0] = static_cast<real>(rng.uniform(0.2, 0.8));
  // Nonzero biases keep dead channels off the relu kink at exactly zero.
  ParamList params = net.parameters();
  for (auto& p : params) {
    if (p.name.ends_with("bias")) {
      for (real& v : p.tensor.mutable_data()) v = static_cast<real>(rng.uniform(-0.1, 0.1));
    }
  }
  Tensor x = random_uniform({1, 1, 16, 16}, 0, 1, rng, true);

  std::vector<Tensor> tensors{x};
  for (auto& p : params) tensors.push_back(p.tensor);
  auto f = [&] {
    AbcOutput out = net.forward(x);
    Tensor total = sum(out.logits);
    for (const Tensor& a : out.aux) total = add(total, sum(a));
    return total;
  };

  ParamCheckOptions opts;
  opts.eps = static_cast<real>(options.eps);
  opts.coords_per_tensor = options.coords_per_tensor;
  opts.seed = rng.next();
  opts.skip_branch_changes = true;
  const GradCheckReport report = grad_check_params_report(f, tensors, opts);
  return {report.max_error, tensors.size(), report.checked, report.skipped};
}

}  // namespace abc
