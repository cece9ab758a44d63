#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>

#include "abc/checkpoint.hpp"
#include "abc/gradcheck.hpp"
#include "abc/loss.hpp"
#include "abc/ops.hpp"
#include "abc/trainer.hpp"
#include "support/oracles.hpp"

using namespace abc;
namespace fs = std::filesystem;

namespace {

Tensor mask_tensor(Shape shape, std::initializer_list<std::size_t> ones) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (std::size_t i : ones) t.mutable_data()[i] = 1.0f;
  return t;
}

AbcConfig tiny_config() {
  AbcConfig cfg;
  cfg.input_dim = 2;
  cfg.height = 32;
  cfg.width = 32;
  return cfg;
}

std::vector<Sample> tiny_dataset(std::size_t n, std::uint64_t seed = 3) {
  SceneSpec spec;
  spec.height = 32;
  spec.width = 32;
  spec.min_targets = 0;
  spec.max_targets = 1;
  spec.seed = seed;
  return generate_dataset(spec, n);
}

std::vector<std::vector<real>> snapshot(const AbcNet& net) {
  std::vector<std::vector<real>> out;
  for (const auto& p : net.parameters()) out.emplace_back(p.tensor.data().begin(), p.tensor.data().end());
  return out;
}

fs::path temp_dir(const std::string& name) {
  fs::path d = fs::temp_directory_path() / ("abc_trainer_test_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST_CASE("soft_iou_loss worked examples") {
  // Saturated logits reproduce a 5-pixel target.
  Tensor t5 = mask_tensor({1, 1, 4, 4}, {0, 3, 5, 9, 15});
  std::vector<real> sat(16, -50.0f);
  for (std::size_t i : {0, 3, 5, 9, 15}) sat[i] = 50.0f;
  CHECK(soft_iou_loss(Tensor({1, 1, 4, 4}, sat), t5).item() == doctest::Approx(0.0).epsilon(1e-3));

  Tensor t9 = mask_tensor({1, 1, 4, 4}, {0, 1, 2, 3, 4, 5, 6, 7, 8});
  CHECK(soft_iou_loss(Tensor::full({1, 1, 4, 4}, -50.0f), t9).item() == doctest::Approx(0.9).epsilon(1e-3));

  Tensor t1 = mask_tensor({1, 1, 2, 2}, {2});
  CHECK(soft_iou_loss(Tensor::zeros({1, 1, 2, 2}), t1).item() == doctest::Approx(1.0 - 1.5 / 3.5).epsilon(1e-6));
}

TEST_CASE("soft_iou_loss rejects non-binary targets and mismatched shapes") {
  Tensor bad({1, 1, 2, 2}, {0, 0.5f, 1, 0});
  CHECK_THROWS_AS(soft_iou_loss(Tensor::zeros({1, 1, 2, 2}), bad), ShapeError);
  CHECK_THROWS_AS(soft_iou_loss(Tensor::zeros({1, 1, 2, 2}), Tensor::zeros({1, 1, 2, 3})), ShapeError);
}

TEST_CASE("soft_iou_loss matches the formula oracle, averages over the batch and stays in [0,1)") {
  Rng rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor logits = random_uniform({3, 1, 4, 4}, -4, 4, rng);
    std::vector<real> tv(48);
    for (real& v : tv) v = rng.uniform() < 0.3 ? 1.0f : 0.0f;
    Tensor target({3, 1, 4, 4}, tv);
    double want = 0;
    for (std::size_t n = 0; n < 3; ++n) {
      std::vector<double> l(logits.data().begin() + n * 16, logits.data().begin() + (n + 1) * 16);
      std::vector<double> t(tv.begin() + n * 16, tv.begin() + (n + 1) * 16);
      want += oracle::soft_iou(l, t, 1.0) / 3.0;
    }
    const double got = soft_iou_loss(logits, target).item();
    CHECK(got == doctest::Approx(want).epsilon(1e-5));
    CHECK(got >= 0.0);
    CHECK(got < 1.0);
  }
}

TEST_CASE("soft_iou_loss decreases as one pixel moves toward its target") {
  Rng rng(13);
  Tensor logits = random_uniform({1, 1, 4, 4}, -2, 2, rng);
  Tensor target = mask_tensor({1, 1, 4, 4}, {1, 6, 7});
  const double base = soft_iou_loss(logits, target).item();
  for (std::size_t i = 0; i < 16; ++i) {
    std::vector<real> moved(logits.data().begin(), logits.data().end());
    moved[i] += target.data()[i] == 1.0f ? 0.5f : -0.5f;
    CHECK(soft_iou_loss(Tensor(logits.shape(), moved), target).item() < base);
  }
}

TEST_CASE("soft_iou_loss gradient matches finite differences on random 4x4 instances") {
  Rng rng(14);
  for (int trial = 0; trial < 5; ++trial) {
    Tensor logits = random_uniform({1, 1, 4, 4}, -3, 3, rng);
    std::vector<real> tv(16);
    for (real& v : tv) v = rng.uniform() < 0.4 ? 1.0f : 0.0f;
    Tensor target({1, 1, 4, 4}, tv);
    CHECK(grad_check([&](const Tensor& x) { return soft_iou_loss(x, target); }, logits) < 1e-3);
  }
}

TEST_CASE("backward through a small net under soft_iou_loss matches finite differences") {
  Rng rng(15);
  Conv2d c1(1, 3, 3, 1, rng), c2(3, 1, 3, 1, rng);
  for (Tensor b : {c1.bias, c2.bias})
    for (real& v : b.mutable_data()) v = static_cast<real>(rng.uniform(-0.1, 0.1));
  Tensor x = random_uniform({1, 1, 6, 6}, 0, 1, rng);
  Tensor target = mask_tensor({1, 1, 6, 6}, {7, 8, 14, 27});
  std::vector<Tensor> params{c1.weight, c1.bias, c2.weight, c2.bias};
  ParamCheckOptions opts;
  opts.skip_branch_changes = true;
  auto report = grad_check_params_report([&] { return soft_iou_loss(c2(relu(c1(x))), target); }, params, opts);
  CHECK(report.max_error < 1e-3);
  CHECK(report.checked > report.skipped);
}

TEST_CASE("deep_supervision_loss is the plain mean over heads") {
  Rng rng(16);
  Tensor target = mask_tensor({2, 1, 4, 4}, {0, 5, 20});
  Tensor main = random_uniform({2, 1, 4, 4}, -2, 2, rng);
  CHECK(deep_supervision_loss(main, {}, target).item() == soft_iou_loss(main, target).item());

  std::vector<Tensor> same{main, main, main};
  CHECK(deep_supervision_loss(main, same, target).item() ==
        doctest::Approx(soft_iou_loss(main, target).item()).epsilon(1e-6));

  std::vector<Tensor> aux;
  double total = soft_iou_loss(main, target).item();
  for (int i = 0; i < 3; ++i) {
    aux.push_back(random_uniform({2, 1, 4, 4}, -2, 2, rng));
    total += soft_iou_loss(aux.back(), target).item();
  }
  CHECK(deep_supervision_loss(main, aux, target).item() == doctest::Approx(total / 4).epsilon(1e-6));
}

TEST_CASE("adamw examples") {
  SUBCASE("zero gradient without decay leaves parameters unchanged") {
    ParamList ps{{"w", Tensor({3}, {1, -2, 3}, true)}};
    AdamWState st = AdamWState::zeros_like(ps);
    ps[0].tensor.zero_grad();
    adamw_step(ps, st, {0.9f, 0.999f, 1e-8f, 0.0f}, 0.1f);
    CHECK(std::vector<real>(ps[0].tensor.data().begin(), ps[0].tensor.data().end()) == std::vector<real>{1, -2, 3});
  }
  SUBCASE("first step with unit gradient moves by lr") {
    ParamList ps{{"w", Tensor({1}, {0.5f}, true)}};
    AdamWState st = AdamWState::zeros_like(ps);
    sum(ps[0].tensor).backward();
    adamw_step(ps, st, {0.9f, 0.999f, 1e-8f, 0.0f}, 1e-3f);
    CHECK(std::abs(ps[0].tensor.data()[0] - (0.5 - 1e-3)) < 1e-6);
    CHECK(st.step == 1);
  }
  SUBCASE("pure decay term") {
    ParamList ps{{"w", Tensor({1}, {1.0f}, true)}};
    AdamWState st = AdamWState::zeros_like(ps);
    adamw_step(ps, st, {0.9f, 0.999f, 1e-8f, 0.01f}, 0.1f);
    CHECK(ps[0].tensor.data()[0] == doctest::Approx(0.999).epsilon(1e-7));
  }
  SUBCASE("mismatched state is an error") {
    ParamList ps{{"w", Tensor({2}, {1, 1}, true)}};
    AdamWState st = AdamWState::zeros_like(ParamList{{"w", Tensor({3}, {1, 1, 1}, true)}});
    CHECK_THROWS_AS(adamw_step(ps, st, {}, 0.1f), ShapeError);
  }
}

TEST_CASE("adamw matches a double-precision reference over several steps") {
  const double lr = 0.05, b1 = 0.9, b2 = 0.999, eps = 1e-8, wd = 0.01;
  ParamList ps{{"w", Tensor({2}, {0.7f, -1.3f}, true)}};
  AdamWState st = AdamWState::zeros_like(ps);
  double p[2] = {0.7, -1.3}, m[2] = {0, 0}, v[2] = {0, 0};
  for (int t = 1; t <= 6; ++t) {
    // loss = sum(w^3) so the gradient changes every step
    ps[0].tensor.zero_grad();
    Tensor w = ps[0].tensor;
    sum(mul(mul(w, w), w)).backward();
    adamw_step(ps, st, {float(b1), float(b2), float(eps), float(wd)}, float(lr));
    for (int i = 0; i < 2; ++i) {
      const double g = 3 * p[i] * p[i];
      p[i] *= 1 - lr * wd;
      m[i] = b1 * m[i] + (1 - b1) * g;
      v[i] = b2 * v[i] + (1 - b2) * g * g;
      const double mh = m[i] / (1 - std::pow(b1, t)), vh = v[i] / (1 - std::pow(b2, t));
      p[i] -= lr * mh / (std::sqrt(vh) + eps);
      CHECK(ps[0].tensor.data()[i] == doctest::Approx(p[i]).epsilon(1e-4));
    }
  }
}

TEST_CASE("poly_lr examples and monotonicity") {
  CHECK(poly_lr(3e-4f, 0, 100) == 3e-4f);
  CHECK(poly_lr(3e-4f, 100, 100) == 0.0f);
  CHECK(poly_lr(3e-4f, 150, 100) == 0.0f);
  CHECK(poly_lr(3e-4f, 50, 100, 0.9f) == doctest::Approx(3e-4 * std::pow(0.5, 0.9)).epsilon(1e-6));
  CHECK(poly_lr(3e-4f, 50, 100, 0.9f) == doctest::Approx(1.608e-4).epsilon(1e-3));
  float prev = poly_lr(1.0f, 0, 37, 2.0f);
  for (std::uint64_t i = 1; i <= 40; ++i) {
    const float cur = poly_lr(1.0f, i, 37, 2.0f);
    CHECK(cur <= prev);
    prev = cur;
  }
}

TEST_CASE("fit with lr 0 and no weight decay leaves parameters bitwise unchanged") {
  AbcNet net(tiny_config(), 5);
  const auto before = snapshot(net);
  TrainConfig tc;
  tc.epochs = 1;
  tc.batch_size = 4;
  tc.base_lr = 0.0f;
  tc.weight_decay = 0.0f;
  AdamWState st;
  const auto data = tiny_dataset(4);
  TrainingLog log = fit(net, data, tc, st);
  CHECK(log.epochs.size() == 1);
  CHECK(snapshot(net) == before);
  CHECK(st.step == 1);
}

TEST_CASE("fit is deterministic in its seed") {
  const auto data = tiny_dataset(6);
  TrainConfig tc;
  tc.epochs = 3;
  tc.batch_size = 4;
  tc.base_lr = 1e-3f;
  tc.seed = 9;
  tc.horizontal_flip = true;
  auto run = [&] {
    AbcNet net(tiny_config(), 1);
    AdamWState st;
    const std::string csv = fit(net, data, tc, st).to_csv();
    return std::make_pair(csv, snapshot(net));
  };
  const auto a = run(), b = run();
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
  CHECK(std::count(a.first.begin(), a.first.end(), '\n') == 3);
}

TEST_CASE("fit logs epoch, loss, lr and IoU and uses the poly schedule") {
  const auto data = tiny_dataset(4);
  TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 2;
  tc.base_lr = 1e-3f;
  AbcNet net(tiny_config(), 2);
  AdamWState st;
  TrainingLog log = fit(net, data, tc, st);
  REQUIRE(log.epochs.size() == 2);
  CHECK(log.epochs[0].epoch == 1);
  CHECK(log.epochs[0].lr == doctest::Approx(1e-3));
  CHECK(log.epochs[1].lr == doctest::Approx(1e-3 * std::pow(0.5, 0.9)).epsilon(1e-5));
  CHECK(log.epochs[1].train_iou >= 0.0);
  CHECK(log.epochs[1].train_iou <= 1.0);
  CHECK(format_epoch_line(log.epochs[0]).rfind("1,", 0) == 0);
}

TEST_CASE("fit rejects bad inputs and aborts on a non-finite loss") {
  TrainConfig tc;
  AdamWState st;
  AbcNet net(tiny_config(), 1);
  CHECK_THROWS_AS(fit(net, std::vector<Sample>{}, tc, st), std::invalid_argument);

  SceneSpec big;
  big.height = 64;
  big.width = 64;
  const auto wrong = generate_dataset(big, 1);
  CHECK_THROWS_AS(fit(net, wrong, tc, st), ShapeError);

  ParamList ps = net.parameters();
  ps.back().tensor.mutable_data()[0] = std::numeric_limits<real>::quiet_NaN();
  AdamWState fresh;
  CHECK_THROWS_AS(fit(net, tiny_dataset(2), tc, fresh), NumericalError);

  TrainConfig bad = tc;
  bad.epochs = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("checkpoint round trip is bitwise lossless") {
  AbcNet net(tiny_config(), 4);
  TrainConfig tc;
  tc.epochs = 1;
  tc.base_lr = 1e-3f;
  AdamWState st;
  fit(net, tiny_dataset(2), tc, st);

  const fs::path dir = temp_dir("roundtrip");
  save_checkpoint(net, st, dir / "m.abck");
  AbcNet other(tiny_config(), 99);
  AdamWState st2;
  load_checkpoint(dir / "m.abck", other, st2);
  CHECK(snapshot(other) == snapshot(net));
  CHECK(st2.step == st.step);
  CHECK(st2.first_moment == st.first_moment);
  CHECK(st2.second_moment == st.second_moment);
  CHECK(encode_checkpoint(make_checkpoint(other, st2)) == encode_checkpoint(make_checkpoint(net, st)));
}

TEST_CASE("checkpoint byte layout") {
  Checkpoint c;
  c.parameters.push_back({"w", {2}, {1.0f, -2.0f}});
  c.step = 7;
  const std::string bytes = encode_checkpoint(c);
  CHECK(bytes.substr(0, 4) == "ABCK");
  std::uint32_t version = 0, count = 0;
  std::memcpy(&version, bytes.data() + 4, 4);
  std::memcpy(&count, bytes.data() + 8, 4);
  CHECK(version == kCheckpointVersion);
  CHECK(count == 1);
  // name length, name, rank, one dim, two floats, moment count, step
  CHECK(bytes.size() == 12 + 2 + 1 + 1 + 4 + 8 + 4 + 8);
  std::uint64_t step = 0;
  std::memcpy(&step, bytes.data() + bytes.size() - 8, 8);
  CHECK(step == 7);
  const Checkpoint back = decode_checkpoint(bytes);
  CHECK(back.parameters[0].data == c.parameters[0].data);
}

TEST_CASE("checkpoint corruption yields distinct errors") {
  AbcNet net(tiny_config(), 1);
  const std::string good = encode_checkpoint(make_checkpoint(net, AdamWState::zeros_like(net.parameters())));
  auto code_of = [](const std::string& bytes) {
    try {
      decode_checkpoint(bytes);
    } catch (const CheckpointError& e) {
      return e.code();
    }
    return CheckpointErrorCode::io;
  };
  CHECK(code_of(good.substr(0, good.size() - 5)) == CheckpointErrorCode::truncated_payload);
  std::string magic = good;
  magic[0] = 'X';
  CHECK(code_of(magic) == CheckpointErrorCode::bad_magic);
  std::string version = good;
  version[4] = 9;
  CHECK(code_of(version) == CheckpointErrorCode::version_mismatch);
  CHECK(to_string(CheckpointErrorCode::truncated_payload).find("truncated payload") != std::string::npos);
  CHECK(to_string(CheckpointErrorCode::bad_magic).find("bad magic") != std::string::npos);

  AbcConfig other = tiny_config();
  other.input_dim = 3;
  AbcNet mismatched(other, 1);
  AdamWState st;
  CHECK_THROWS_AS(restore_checkpoint(decode_checkpoint(good), mismatched, st), CheckpointError);
  CHECK_THROWS_AS(read_checkpoint_file("/nonexistent/abc.abck"), CheckpointError);
}

TEST_CASE("fit writes cadence, best and final checkpoints") {
  const fs::path dir = temp_dir("cadence");
  TrainConfig tc;
  tc.epochs = 4;
  tc.base_lr = 1e-3f;
  tc.checkpoint_path = dir / "model.abck";
  tc.checkpoint_every = 2;
  AbcNet net(tiny_config(), 1);
  AdamWState st;
  fit(net, tiny_dataset(2), tc, st);
  CHECK(fs::exists(dir / "model.abck"));
  CHECK(fs::exists(dir / "model.epoch0002.abck"));
  CHECK(fs::exists(dir / "model.epoch0004.abck"));
  CHECK_FALSE(fs::exists(dir / "model.epoch0001.abck"));
  CHECK(fs::exists(dir / "model.best.abck"));
}

TEST_CASE("resuming with lr 0 and no decay keeps parameters bitwise") {
  const fs::path dir = temp_dir("resume");
  const auto data = tiny_dataset(4);
  TrainConfig tc;
  tc.epochs = 2;
  tc.base_lr = 1e-3f;
  AbcNet net(tiny_config(), 6);
  AdamWState st;
  fit(net, data, tc, st);
  save_checkpoint(net, st, dir / "m.abck");

  AbcNet resumed(tiny_config(), 0);
  AdamWState rs;
  load_checkpoint(dir / "m.abck", resumed, rs);
  const auto before = snapshot(resumed);
  TrainConfig more = tc;
  more.epochs = 4;
  more.base_lr = 0.0f;
  more.weight_decay = 0.0f;
  TrainingLog log = fit(resumed, data, more, rs);
  CHECK(log.epochs.size() == 2);
  CHECK(log.epochs.front().epoch == 3);
  CHECK(snapshot(resumed) == before);
}

TEST_CASE("evaluation of a zero model predicts every pixel positive") {
  AbcNet net(tiny_config(), 1);
  ParamList ps = net.parameters();
  for (auto& p : ps)
    for (real& v : p.tensor.mutable_data()) v = 0.0f;
  const auto data = tiny_dataset(3, 8);
  const auto probs = predict_probabilities(net, data);
  for (const auto& p : probs)
    for (float v : p) CHECK(v == 0.5f);
  const auto counts = evaluate_counts(net, data);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto truth = static_cast<std::uint64_t>(std::count(data[i].mask.begin(), data[i].mask.end(), 1));
    CHECK(counts[i].tp == truth);
    CHECK(counts[i].fp == 1024 - truth);
    CHECK(iou(counts[i]) == doctest::Approx(truth / 1024.0));
  }
}
