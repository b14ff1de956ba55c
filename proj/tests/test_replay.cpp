#include <doctest.h>

#include <map>
#include <thread>

#include "ohprl/errors.hpp"
#include "ohprl/replay.hpp"
#include "ohprl/runtime.hpp"
#include "oracles.hpp"

using namespace ohprl;

namespace {

Transition transition(double tag) {
    return {Vector::Constant(3, tag), Vector::Constant(2, 0.1), 0.0, 0.0, Vector::Constant(3, tag + 1)};
}

PreferenceTuple tuple(double tag, double pref, double weak) {
    return {Vector::Constant(3, tag), Vector::Constant(2, pref), Vector::Constant(2, weak), 0.0, 0.0,
            Vector::Constant(3, tag + 1)};
}

}  // namespace

TEST_SUITE("replay") {

TEST_CASE("prefill counts steps into the right buffers") {
    RunConfig config;
    const auto demos = generate_demos(config, 20);
    const auto policy = init_params(std::vector<int>{7, 8, 4}, Head::Policy, 0);
    const auto rollouts = generate_rollouts(config, policy, 10);
    std::size_t demo_steps = 0;
    std::size_t rollout_steps = 0;
    for (const auto& e : demos) demo_steps += e.steps.size();
    for (const auto& e : rollouts) rollout_steps += e.steps.size();

    BufferPair buffers;
    Rng rng(1);
    prefill(buffers, demos, rollouts, rng);
    CHECK(buffers.pref.size() == demo_steps);
    CHECK(buffers.online.size() == rollout_steps);
    for (const auto& t : buffers.pref.snapshot()) {
        CHECK(t.weak.cwiseAbs().maxCoeff() <= 1.0);
    }
}

TEST_CASE("prefill is deterministic for the same seeds") {
    RunConfig config;
    config.seed = 3;
    auto build = [&] {
        BufferPair b;
        Rng rng(derive_seed(config.seed, 6));
        const auto policy = init_params(std::vector<int>{7, 8, 4}, Head::Policy, 9);
        prefill(b, generate_demos(config, 3), generate_rollouts(config, policy, 2), rng);
        return b;
    };
    const BufferPair a = build();
    const BufferPair b = build();
    const auto pa = a.pref.snapshot();
    const auto pb = b.pref.snapshot();
    REQUIRE(pa.size() == pb.size());
    for (std::size_t k = 0; k < pa.size(); ++k) {
        CHECK(pa[k].state == pb[k].state);
        CHECK(pa[k].weak == pb[k].weak);
    }
    const auto oa = a.online.snapshot();
    const auto ob = b.online.snapshot();
    REQUIRE(oa.size() == ob.size());
    for (std::size_t k = 0; k < oa.size(); ++k) CHECK(oa[k].action == ob[k].action);
}

TEST_CASE("a demo without success is rejected") {
    Episode failed;
    failed.steps.push_back({Vector::Zero(7), Vector::Zero(2), 0.0, 0.0, Vector::Zero(7)});
    BufferPair buffers;
    Rng rng(0);
    CHECK_THROWS_AS(prefill(buffers, {failed}, {}, rng), ValidationError);
    CHECK(buffers.pref.empty());
}

TEST_CASE("ohprl without demos is rejected") {
    RunConfig config;
    config.prefill_demos = 0;
    CHECK_THROWS_AS(validate(config), ConfigError);
}

TEST_CASE("symmetric sampling returns n from each buffer") {
    BufferPair buffers;
    for (int k = 0; k < 50; ++k) buffers.online.push(transition(k));
    for (int k = 0; k < 5; ++k) buffers.pref.push(tuple(k, 1, 0));
    Rng rng(2);
    const SymmetricSample s = sample_symmetric(buffers, 128, rng);
    CHECK(s.online.size() == 128);
    CHECK(s.pref.size() == 128);
}

TEST_CASE("a single-item buffer is sampled with replacement") {
    BufferPair buffers;
    buffers.online.push(transition(7));
    buffers.pref.push(tuple(7, 1, 0));
    Rng rng(2);
    const SymmetricSample s = sample_symmetric(buffers, 4, rng);
    REQUIRE(s.pref.size() == 4);
    for (const auto& t : s.pref) CHECK(t.state(0) == 7.0);
}

TEST_CASE("empty preference buffer names itself") {
    BufferPair buffers;
    buffers.online.push(transition(1));
    Rng rng(0);
    try {
        sample_symmetric(buffers, 4, rng);
        FAIL("expected SamplingError");
    } catch (const SamplingError& e) {
        CHECK(std::string(e.what()) == "preference buffer empty");
    }
}

TEST_CASE("base batch keeps a_p and drops a_w") {
    const std::vector<Transition> online{transition(1)};
    const std::vector<PreferenceTuple> pref{tuple(2, 0.5, -0.5)};
    const auto base = build_base_batch(online, pref);
    REQUIRE(base.size() == 2);
    CHECK(base[0].state(0) == 1.0);
    CHECK(base[1].action == Vector::Constant(2, 0.5));
    const auto same = build_base_batch({}, {tuple(3, 0.2, 0.2)});
    REQUIRE(same.size() == 1);
    CHECK(same[0].action == Vector::Constant(2, 0.2));
}

TEST_CASE("base batch has 2n items and no weak actions") {
    Rng rng(4);
    std::vector<Transition> online;
    std::vector<PreferenceTuple> pref;
    for (int k = 0; k < 16; ++k) {
        online.push_back(transition(k));
        pref.push_back(tuple(k, 0.25, 0.75));  // 0.75 never appears as an executed action
    }
    const auto base = build_base_batch(online, pref);
    CHECK(base.size() == 32);
    for (const auto& t : base) CHECK(t.action(0) != 0.75);
}

TEST_CASE("ring buffer keeps the most recent items") {
    RingBuffer<Transition> ring(10);
    for (int k = 0; k < 25; ++k) ring.push(transition(k));
    CHECK(ring.size() == 10);
    CHECK(ring.inserted() == 25);
    const auto items = ring.snapshot();
    for (int k = 0; k < 10; ++k) CHECK(items[k].state(0) == 15 + k);
    CHECK_THROWS_AS(RingBuffer<Transition>(0), ConfigError);
}

TEST_CASE("sampling is uniform (chi-square at p = 0.01)") {
    RingBuffer<Transition> ring(10);
    for (int k = 0; k < 10; ++k) ring.push(transition(k));
    Rng rng(2024);
    const auto draws = ring.sample(100000, rng, "online buffer");
    std::map<int, int> counts;
    for (const auto& t : draws) ++counts[static_cast<int>(t.state(0))];
    REQUIRE(counts.size() == 10);
    double chi2 = 0.0;
    for (const auto& [k, c] : counts) chi2 += (c - 10000.0) * (c - 10000.0) / 10000.0;
    CHECK(oracle::chi_square_survival(chi2, 9) > 0.01);
}

TEST_CASE("chi-square oracle reproduces a table value") {
    // 21.666 is the 0.99 quantile for 9 degrees of freedom.
    CHECK(oracle::chi_square_survival(21.666, 9) == doctest::Approx(0.01).epsilon(1e-3));
}

TEST_CASE("concurrent appends and samples stay consistent") {
    RingBuffer<Transition> ring(1000);
    ring.push(transition(0));
    std::thread writer([&] {
        for (int k = 1; k < 5000; ++k) ring.push(transition(k));
    });
    Rng rng(0);
    for (int k = 0; k < 200; ++k) {
        for (const auto& t : ring.sample(16, rng, "online buffer")) CHECK(t.state.size() == 3);
    }
    writer.join();
    CHECK(ring.inserted() == 5000);
    CHECK(ring.size() == 1000);
}

TEST_CASE("stacking preserves column order") {
    const TransitionBatch b = stack(std::vector<Transition>{transition(1), transition(2)});
    CHECK(b.size() == 2);
    CHECK(b.states(0, 1) == 2.0);
    const PreferenceBatch p = stack(std::vector<PreferenceTuple>{tuple(1, 0.3, -0.3)});
    CHECK(p.weak(0, 0) == -0.3);
}

}  // TEST_SUITE
