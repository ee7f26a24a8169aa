#include <doctest.h>

#include <cmath>
#include <vector>

#include "fixtures.hpp"
#include "nmf/errors.hpp"
#include "nmf/gradcheck.hpp"
#include "nmf/memory.hpp"
#include "nmf/ops.hpp"
#include "nmf/tape.hpp"
#include "oracle.hpp"

using namespace nmf;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double bound = 1.0) {
  Tensor t = Tensor::zeros(std::move(shape));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : t.mutable_data()) v = dist(rng);
  return t;
}

Tensor probability_vector(std::size_t n, Rng& rng) {
  Tensor t = Tensor::zeros({n});
  std::exponential_distribution<double> dist(1.0);
  double total = 0.0;
  for (double& v : t.mutable_data()) total += v = dist(rng);
  for (double& v : t.mutable_data()) v /= total;
  return t;
}

MemoryState state_with_slots(const MemoryConfig& config, const Tensor& slots) {
  MemoryState s = MemoryState::fresh(config);
  s.slots = slots;
  return s;
}

}  // namespace

TEST_CASE("memory config and fresh state") {
  CHECK_THROWS_AS(MemoryConfig({0, 3}).validate("m"), ConfigError);
  CHECK_THROWS_AS(MemoryConfig({3, 0}).validate("m"), ConfigError);
  const MemoryState s = MemoryState::fresh({4, 3});
  CHECK(s.slots.shape() == Shape{4, 3});
  CHECK(s.read_controller.h.size() == 3);
  CHECK(s.write_controller.c.size() == 3);
  for (double v : s.slots.data()) CHECK(v == 0.0);

  Rng rng(1);
  const MemoryParams p = MemoryParams::init({4, 3}, 5, rng);
  CHECK(p.read_cell.input_dim == 5);
  CHECK(p.read_cell.hidden_dim == 3);
  CHECK(p.write_cell.input_dim == 3);
  CHECK(p.output_mlp.input_dim == 8);
  CHECK(p.output_mlp.output_dim == 3);
  std::vector<NamedTensor> named;
  p.collect("mem", named);
  CHECK(named.size() == 20);
  CHECK(named[0].name == "mem.read.w_input");
  CHECK(named[8].name == "mem.write.w_input");
  CHECK(named[16].name == "mem.output.w_hidden");
}

TEST_CASE("attend examples") {
  SUBCASE("identical slots") {
    const Tensor z = attend(Tensor::vector({0.3, -2.0}), Tensor::matrix(3, 2, {1, 2, 1, 2, 1, 2}));
    for (double v : z.data()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  }
  SUBCASE("single slot") {
    const Tensor z = attend(Tensor::vector({5.0, -1.0}), Tensor::matrix(1, 2, {3, 4}));
    CHECK(z.size() == 1);
    CHECK(z[0] == 1.0);
  }
  SUBCASE("three slots") {
    const Tensor z = attend(Tensor::vector({1, 0}), Tensor::matrix(3, 2, {1, 0, 0, 1, 2, 0}));
    // scores [1, 0, 2]
    const double total = std::exp(1.0) + 1.0 + std::exp(2.0);
    CHECK(std::abs(z[0] - std::exp(1.0) / total) < 1e-15);
    CHECK(std::abs(z[1] - 1.0 / total) < 1e-15);
    CHECK(std::abs(z[2] - std::exp(2.0) / total) < 1e-15);
    CHECK(z[0] == doctest::Approx(0.2447).epsilon(1e-3));
    CHECK(z[1] == doctest::Approx(0.0900).epsilon(1e-3));
    CHECK(z[2] == doctest::Approx(0.6652).epsilon(1e-3));
  }
  SUBCASE("dimension mismatch") {
    CHECK_THROWS_AS(attend(Tensor::vector({1, 0, 0}), Tensor::zeros({3, 2})), DimensionError);
  }
}

TEST_CASE("attend is a probability vector for random inputs") {
  Rng rng(2);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t l = 1 + trial % 9, k = 1 + trial % 7;
    const Tensor z = attend(random_tensor({k}, rng, 20.0), random_tensor({l, k}, rng, 20.0));
    double total = 0.0;
    for (double v : z.data()) {
      REQUIRE(v >= 0.0);
      total += v;
    }
    REQUIRE(std::abs(total - 1.0) < 1e-12);
  }
}

TEST_CASE("read_step examples") {
  Rng rng(3);
  const MemoryConfig config{3, 4};
  const MemoryParams p = MemoryParams::init(config, 5, rng);
  const Tensor h = random_tensor({5}, rng);
  const oracle::Vec q = oracle::lstm(p.read_cell, oracle::vec(h), oracle::Lstm{oracle::Vec(4, 0.0), oracle::Vec(4, 0.0)}).h;

  SUBCASE("one-hot attention selects a slot") {
    // Slot 1 points along q with a huge norm, the others are zero.
    Tensor slots = Tensor::zeros({3, 4});
    for (std::size_t j = 0; j < 4; ++j) slots.mutable_data()[4 + j] = 1e4 * (q[j] >= 0 ? 1.0 : -1.0);
    const auto [read, controller] = read_step(p, h, state_with_slots(config, slots));
    CHECK(read.z[0] == 0.0);
    CHECK(read.z[1] == 1.0);
    CHECK(read.z[2] == 0.0);
    for (std::size_t j = 0; j < 4; ++j) CHECK(read.m[j] == slots.at(1, j));
    (void)controller;
  }
  SUBCASE("equal slots read back the shared row") {
    const Tensor row = random_tensor({4}, rng);
    Tensor slots = Tensor::zeros({3, 4});
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 4; ++j) slots.mutable_data()[i * 4 + j] = row[j];
    const auto [read, controller] = read_step(p, h, state_with_slots(config, slots));
    for (std::size_t j = 0; j < 4; ++j) CHECK(std::abs(read.m[j] - row[j]) < 1e-15);
    (void)controller;
  }
  SUBCASE("reading leaves the slots untouched") {
    const Tensor slots = random_tensor({3, 4}, rng);
    const Tensor before = slots.clone();
    const MemoryState state = state_with_slots(config, slots);
    const auto [read, controller] = read_step(p, h, state);
    CHECK(bitwise_equal(state.slots, before));
    CHECK(read.q.size() == 4);
    CHECK(controller.h.size() == 4);
  }
  SUBCASE("dimension mismatch") {
    CHECK_THROWS_AS(read_step(p, Tensor::zeros({4}), MemoryState::fresh(config)), DimensionError);
  }
}

TEST_CASE("read_step matches the reference on a tiny fixed instance") {
  Rng rng(4);
  const MemoryConfig config{2, 2};
  const MemoryParams p = MemoryParams::init(config, 2, rng);
  MemoryState state = state_with_slots(config, Tensor::matrix(2, 2, {0.5, -0.25, 1.5, 0.75}));
  state.read_controller = LstmState{Tensor::vector({0.1, -0.2}), Tensor::vector({0.3, 0.05})};
  const Tensor h = Tensor::vector({0.4, -0.9});

  const auto [read, controller] = read_step(p, h, state);
  oracle::Memory ref{oracle::mat(state.slots), {oracle::vec(state.read_controller.h), oracle::vec(state.read_controller.c)},
                     {{0, 0}, {0, 0}}};
  const oracle::Step expected = oracle::memory_step(p, oracle::vec(h), ref);
  CHECK(oracle::max_abs_diff(oracle::vec(read.q), expected.q) <= 1e-12);
  CHECK(oracle::max_abs_diff(oracle::vec(read.z), expected.z) <= 1e-12);
  CHECK(oracle::max_abs_diff(oracle::vec(read.m), expected.m) <= 1e-12);
  CHECK(oracle::max_abs_diff(oracle::vec(read.c), expected.c) <= 1e-12);
  CHECK(oracle::max_abs_diff(oracle::vec(controller.c), expected.next.read.c) <= 1e-12);
}

TEST_CASE("write_step examples") {
  Rng rng(5);
  const MemoryConfig config{3, 2};
  const MemoryParams p = MemoryParams::init(config, 4, rng);
  const Tensor c = random_tensor({2}, rng);
  const Tensor o = lstm_step(p.write_cell, c, LstmState::zeros(2)).h;

  SUBCASE("one-hot replaces one slot exactly") {
    const Tensor slots = random_tensor({3, 2}, rng);
    const MemoryState next = write_step(p, c, Tensor::vector({0, 1, 0}), state_with_slots(config, slots));
    for (std::size_t j = 0; j < 2; ++j) {
      CHECK(next.slots.at(1, j) == o[j]);
      CHECK(next.slots.at(0, j) == slots.at(0, j));
      CHECK(next.slots.at(2, j) == slots.at(2, j));
    }
  }
  SUBCASE("slots already equal to o stay put") {
    Tensor slots = Tensor::zeros({3, 2});
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 2; ++j) slots.mutable_data()[i * 2 + j] = o[j];
    const MemoryState next = write_step(p, c, probability_vector(3, rng), state_with_slots(config, slots));
    CHECK(bitwise_equal(next.slots, slots));
  }
  SUBCASE("blend of a known write vector") {
    const Tensor out = slot_blend(Tensor::matrix(2, 2, {0, 0, 2, 2}), Tensor::vector({0.5, 0.5}), Tensor::vector({1, 1}));
    const oracle::Mat expected = oracle::blend({{0, 0}, {2, 2}}, {0.5, 0.5}, {1, 1});
    CHECK(oracle::max_abs_diff(oracle::mat(out), expected) == 0.0);
    CHECK(oracle::mat(out) == oracle::Mat{{0.5, 0.5}, {1.5, 1.5}});
  }
  SUBCASE("controller advances and read controller is kept") {
    MemoryState state = MemoryState::fresh(config);
    state.read_controller = LstmState{Tensor::vector({0.1, 0.2}), Tensor::vector({0.3, 0.4})};
    const MemoryState next = write_step(p, c, Tensor::vector({0.2, 0.3, 0.5}), state);
    CHECK(bitwise_equal(next.write_controller.h, o));
    CHECK(bitwise_equal(next.read_controller.h, state.read_controller.h));
  }
  SUBCASE("unnormalised scores are rejected") {
    CHECK_THROWS_AS(write_step(p, c, Tensor::vector({0.2, 0.3, 0.4}), MemoryState::fresh(config)), ContractError);
    CHECK_NOTHROW(write_step(p, c, Tensor::vector({0.2, 0.3, 0.5 + 5e-7}), MemoryState::fresh(config)));
    CHECK_THROWS_AS(write_step(p, c, Tensor::vector({0.5, 0.5}), MemoryState::fresh(config)), DimensionError);
  }
}

TEST_CASE("write_step properties on random inputs") {
  Rng rng(6);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t l = 1 + trial % 6, k = 1 + trial % 5;
    const MemoryConfig config{l, k};
    const MemoryParams p = MemoryParams::init(config, 3, rng);
    const Tensor c = random_tensor({k}, rng);
    const Tensor slots = random_tensor({l, k}, rng, 2.0);
    const Tensor z = probability_vector(l, rng);
    MemoryState state = state_with_slots(config, slots);
    state.write_controller = LstmState{random_tensor({k}, rng), random_tensor({k}, rng)};

    const MemoryState next = write_step(p, c, z, state);
    const oracle::Lstm w =
        oracle::lstm(p.write_cell, oracle::vec(c), {oracle::vec(state.write_controller.h), oracle::vec(state.write_controller.c)});
    const oracle::Mat expected = oracle::blend(oracle::mat(slots), oracle::vec(z), w.h);
    REQUIRE(oracle::max_abs_diff(oracle::mat(next.slots), expected) <= 1e-12);

    const Tensor& o = next.write_controller.h;
    for (std::size_t i = 0; i < l; ++i)
      for (std::size_t j = 0; j < k; ++j) {
        const double before = slots.at(i, j), after = next.slots.at(i, j);
        REQUIRE(after >= std::min(before, o[j]));
        REQUIRE(after <= std::max(before, o[j]));
      }

    // Uniform scores move each slot 1/l of the way.
    const MemoryState uniform = write_step(p, c, Tensor::filled({l}, 1.0 / static_cast<double>(l)), state);
    for (std::size_t i = 0; i < l; ++i)
      for (std::size_t j = 0; j < k; ++j) {
        const double moved = uniform.slots.at(i, j) - slots.at(i, j);
        REQUIRE(std::abs(moved - (o[j] - slots.at(i, j)) / static_cast<double>(l)) <= 1e-12);
      }
  }
}

TEST_CASE("memory_step examples") {
  Rng rng(7);
  const MemoryConfig config{4, 3};
  const MemoryParams p = MemoryParams::init(config, 5, rng);
  const Tensor h = random_tensor({5}, rng);

  SUBCASE("two steps on the same input replay the reference") {
    const MemoryState s0 = MemoryState::fresh(config);
    const auto [c1, s1] = memory_step(p, h, s0);
    const auto [c2, s2] = memory_step(p, h, s1);
    const oracle::Step r1 = oracle::memory_step(p, oracle::vec(h), oracle::fresh(config));
    const oracle::Step r2 = oracle::memory_step(p, oracle::vec(h), r1.next);
    CHECK(oracle::max_abs_diff(oracle::vec(c1), r1.c) <= 1e-12);
    CHECK(oracle::max_abs_diff(oracle::vec(c2), r2.c) <= 1e-12);
    CHECK(oracle::max_abs_diff(oracle::mat(s2.slots), r2.next.slots) <= 1e-12);
    CHECK(oracle::max_abs_diff(oracle::vec(c1), oracle::vec(c2)) > 1e-6);
  }
  SUBCASE("fresh memory writes 1/l of o into every slot") {
    const auto [c, next] = memory_step(p, h, MemoryState::fresh(config));
    const Tensor& o = next.write_controller.h;
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(next.slots.at(i, j) - o[j] / 4.0) <= 1e-15);
    CHECK(c.size() == 3);
  }
  SUBCASE("output length is k") {
    for (std::size_t k : {1, 2, 6}) {
      const MemoryConfig cfg{3, k};
      const MemoryParams q = MemoryParams::init(cfg, 2, rng);
      CHECK(memory_step(q, random_tensor({2}, rng), MemoryState::fresh(cfg)).first.size() == k);
    }
  }
}

TEST_CASE("memory_step gradients through three unrolled steps") {
  Rng rng(8);
  const MemoryConfig config{4, 8};
  MemoryParams p = MemoryParams::init(config, 5, rng);
  std::vector<NamedTensor> params;
  p.collect("mem", params);
  std::vector<Tensor> inputs;
  for (int t = 0; t < 3; ++t) inputs.push_back(random_tensor({5}, rng));
  Tensor h0 = random_tensor({5}, rng).set_requires_grad(true);
  params.push_back({"h0", h0});
  const Tensor readout = random_tensor({8}, rng);
  const Tensor initial_slots = random_tensor({4, 8}, rng);

  auto unrolled = [&](bool fresh) {
    MemoryState state = fresh ? MemoryState::fresh(config) : state_with_slots(config, initial_slots);
    Tensor total;
    for (int t = 0; t < 3; ++t) {
      auto [c, next] = memory_step(p, t == 0 ? add(inputs[0], h0) : inputs[t], state);
      state = std::move(next);
      Tensor term = dot(c, readout);
      total = total.defined() ? add(total, term) : term;
    }
    return add(total, sum(state.slots));
  };

  SUBCASE("fresh memory at the standard tolerance") {
    const GradCheckReport report = grad_check([&] { return unrolled(true); }, params, 1e-5, 1e-4);
    CHECK(report.pass);
    CHECK(report.max_relative_error < 1e-4);
  }
  SUBCASE("asymmetric slots against a higher-order difference oracle") {
    // With distinct slots the read controller is live. Several of its weight
    // gradients are near 1e-8, below what h = 1e-5 central differences resolve
    // in 64-bit arithmetic, so the comparison is absolute.
    {
      Tape tape;
      TapeScope scope(tape);
      tape.backward(unrolled(false));
    }
    std::vector<std::vector<double>> analytic;
    double read_norm = 0.0;
    for (const auto& param : params) {
      analytic.emplace_back(param.tensor.grad().begin(), param.tensor.grad().end());
      if (param.name.starts_with("mem.read."))
        for (double g : param.tensor.grad()) read_norm += g * g;
      Tensor(param.tensor).clear_grad();
    }
    CHECK(read_norm > 0.0);
    CHECK(fixtures::richardson_max_abs_error([&] { return unrolled(false).item(); }, params, analytic) < 1e-9);
  }
}
