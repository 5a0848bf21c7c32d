#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hear/ckks/context.hpp"
#include "hear/costmodel.hpp"
#include "hear/sim.hpp"

using namespace hear;

namespace {

const ckks::ParameterSet kFast = ckks::gen_params("fast-hear");

// Simulator that spends one plain rotation per amount instead of hoisting.
class UnhoistedBackend : public SimBackend {
public:
    using SimBackend::SimBackend;
    std::vector<Ciphertext> rot_many(const Ciphertext& a, std::span<const int> ks)
    {
        std::vector<Ciphertext> out;
        for (int k : ks) out.push_back(rot(a, k));
        return out;
    }
};

PipelinePlan plan_for(const char* net, Mode m, Strategy st)
{
    const NetworkShape s = NetworkShape::named(net);
    const int slots = s.widths[0] >= 64 ? 8192 : 2048;
    return compile_pipeline(s, m, st, slots, kFast.prime_values(), kFast.delta_msg);
}

// Runs `run` on the simulator and reports it against `model`.
template <class B = SimBackend>
CostReport measure(const PipelinePlan& model, const PipelinePlan& run)
{
    const CollapsedParams params = collapse_layers(random_raw_params(run.shape, 1));
    B be(run.slots, run.primes, 1);
    const auto x = pack_input(random_input(run.shape.frames, run.shape.joints, 2), run.slots, run.shape.dim);
    run_pipeline(be, params, run, be.encrypt(x.slots, run.start_level, run.delta));
    return make_report(model, be.counters());
}

CostReport measure(const PipelinePlan& plan) { return measure(plan, plan); }

}  // namespace

TEST_CASE("predictions match the simulator on every network and combination")
{
    for (const char* net : {"1d-w64", "1d-w128", "2d-w64", "2d-w128", "2d-w8-16x15-c4", "1d-w8-16x15-c4"})
        for (Mode m : {Mode::Hear, Mode::Fast})
            for (Strategy st : {Strategy::Full, Strategy::Giant, Strategy::Baby}) {
                const PipelinePlan plan = plan_for(net, m, st);
                const Verdict v = compare(measure(plan));
                INFO(net << " " << to_string(m) << " " << to_string(st));
                CHECK(v.pass);
                CHECK(v.mismatches.empty());
            }
}

TEST_CASE("a strategy mismatch shows up as a rotation delta")
{
    const PipelinePlan giant = plan_for("2d-w64", Mode::Fast, Strategy::Giant);
    const PipelinePlan baby = plan_for("2d-w64", Mode::Fast, Strategy::Baby);
    const CostReport r = measure(giant, baby);
    const Verdict v = compare(r);
    CHECK_FALSE(v.pass);
    bool rot_delta = false;
    for (const auto& l : r.layers)
        if (l.label.starts_with("conv") && l.predicted.rot != l.measured.rot) rot_delta = true;
    CHECK(rot_delta);
    for (const auto& l : r.layers)
        if (l.label.starts_with("conv")) CHECK(l.predicted.mult_plain == l.measured.mult_plain);
}

TEST_CASE("missing hoisting moves rotations out of the hoisted groups")
{
    const PipelinePlan plan = plan_for("2d-w64", Mode::Fast, Strategy::Giant);
    const CostReport r = measure<UnhoistedBackend>(plan, plan);
    CHECK_FALSE(compare(r).pass);
    const OpCounts p = r.predicted_total(), m = r.measured_total();
    CHECK(m.hoisted_total == 0);
    CHECK(m.rot == p.rot + p.hoisted_total);
    CHECK(m.rotations() == p.rotations());
}

TEST_CASE("largest 2D network, fast mode, giant step")
{
    const PipelinePlan plan = plan_for("2d-w128", Mode::Fast, Strategy::Giant);
    const auto pred = predict(plan);
    const ConvCost c3 = predict_conv(plan.conv[2], true);
    CHECK(c3.core.rot == 256);
    CHECK(c3.pre.rot == 15);
    CHECK(c3.post.rot == 128);
    CHECK(c3.total().rot == 399);
    CHECK(c3.core.mult_plain == 4608);
    CHECK(pred.at("conv3/core") == c3.core);
    const CostReport r = measure(plan);
    const OpCounts total = r.measured_total();
    CHECK(total.mult == 56);
    CHECK(total.rescale == 172);
    CHECK(total.mult_plain == 10008);
    CHECK(total.rot == 852);
    CHECK(total.hoisted_total == 46);
    CHECK(predict_conv(plan_for("2d-w128", Mode::Fast, Strategy::Full).conv[2], true).core.rot == 0);
}

TEST_CASE("merging divides the core plaintext products by the load factor")
{
    for (const char* net : {"1d-w64", "1d-w128", "2d-w64", "2d-w128"}) {
        const PipelinePlan hear = plan_for(net, Mode::Hear, Strategy::Giant);
        const PipelinePlan fast = plan_for(net, Mode::Fast, Strategy::Giant);
        for (int t = 2; t <= 3; ++t) {
            const auto h = predict_conv(hear.conv[t - 1], false).core.mult_plain;
            const auto f = predict_conv(fast.conv[t - 1], true).core.mult_plain;
            CHECK(f * static_cast<std::uint64_t>(fast.conv[t - 1].n_p) == h);
        }
    }
}

TEST_CASE("pre and post steps")
{
    const PipelinePlan plan = plan_for("2d-w128", Mode::Fast, Strategy::Giant);
    const ConvPlan& p = plan.conv[2];
    const ConvCost c = predict_conv(p, true);
    const std::uint64_t n_p = p.n_p, groups = p.n_in / n_p;
    CHECK(c.pre.rot == (n_p - 1) * groups);
    CHECK(c.pre.mult_plain == static_cast<std::uint64_t>(p.n_in));
    CHECK(c.pre.rescale == groups);
    CHECK(c.post.rot == static_cast<std::uint64_t>(p.n_out) * 4);  // n_p = 16
    const ConvCost unmerged = predict_conv(p, false);
    CHECK(unmerged.pre == OpCounts{});
    CHECK(unmerged.post == OpCounts{});
    CHECK(rotate_sum_rotations(1) == 0);
    CHECK(rotate_sum_rotations(8) == 3);
    CHECK(rotate_sum_rotations(3) == 2);
}

TEST_CASE("report serialization")
{
    const PipelinePlan plan = plan_for("2d-w8-16x15-c4", Mode::Fast, Strategy::Baby);
    const CostReport r = measure(plan);
    const auto j = r.to_json();
    CHECK(j.contains("layers"));
    CHECK(r.to_table().find("conv3") != std::string::npos);
    CHECK(is_extended_label("fc"));
    CHECK_FALSE(is_extended_label("conv2/core"));
}
