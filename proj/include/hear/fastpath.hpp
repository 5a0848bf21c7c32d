#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "hear/backend.hpp"
#include "hear/conv.hpp"

namespace hear {

enum class Mode { Hear, Fast };

const char* to_string(Mode m);
Mode parse_mode(const std::string& s);

// Pre/post processing of a merged convolution. Source m is moved by -mu[m]
// after masking; outputs are folded with x += rot(x, v) for v in nu.
struct MergeSpec {
    int n_p = 1;
    std::vector<int> mu;
    std::vector<int> nu;
    PlainVector mask;
};

MergeSpec build_merge_spec(const ConvPlan& plan, int mask_level, double mask_scale);

// Per-output-ciphertext activation plaintexts (c0, c1, c2), each masked to
// valid positions of `layout`.
std::array<PlainVector, 3> activation_pts(const CollapsedParams& params, int t, int j, const PackedLayout& layout,
                                          int c1_level, double c1_scale, double c2_scale, int c0_level,
                                          double c0_scale);

// Diagonal FC plaintext for input ciphertext i and diagonal l: slot
// ((o + l) mod ell) * dist holds W[o][i*ell + (o + l) mod ell].
PlainVector fc_pt(const CollapsedParams& params, const PackedLayout& layout, int i, int l, int level, double scale);
PlainVector fc_bias_pt(const CollapsedParams& params, const PackedLayout& layout, double scale);

// Logit o sits at slot o * dist.
std::vector<double> extract_logits(const SlotVector& v, const PackedLayout& layout, int classes);

struct ScheduleStep {
    std::string label;
    int level = 0;
    double scale = 0.0;
};

struct PipelinePlan {
    NetworkShape shape;
    Mode mode = Mode::Fast;
    Strategy strategy = Strategy::Giant;
    int slots = 0;
    int start_level = 0;
    double delta = 0.0;
    std::vector<double> primes;  // primes[l] is dropped when rescaling from level l
    std::array<ConvPlan, 3> conv;
    std::array<int, 3> mask_level{-1, -1, -1};  // level of pt_zone for merged layers
    int fc_level = 1;
    PackedLayout final_layout;
    std::vector<ScheduleStep> ladder;

    // Rotation amount (normalized) -> highest level it is applied at.
    std::map<int, int> rotation_keys() const;
    const ScheduleStep& expected(const std::string& label) const;
    nlohmann::json to_json() const;
};

int default_start_level(Mode m);

// load_factors[t-1] overrides the table load factor for t = 2, 3 when > 0.
PipelinePlan compile_pipeline(const NetworkShape& shape, Mode mode, Strategy strategy, int slots,
                              std::vector<double> primes, double delta, std::array<int, 3> load_factors = {0, 0, 0});

void check_step(const PipelinePlan& plan, const std::string& label, int level, double scale,
                std::vector<ScheduleStep>* trace);

// Plaintexts the encrypted pipeline consumes, grouped by kind and level.
struct PlaintextGroup {
    std::string kind;  // "conv", "mask", "act", "fc"
    int layer = 0;     // 1..3, or 4 for the FC layer
    int level = 0;
    std::size_t count = 0;
};

std::vector<PlaintextGroup> plaintext_inventory(const PipelinePlan& plan);

// RNS storage of the inventory: each plaintext at level l holds (l+1)
// limbs of n 64-bit words; the full-level figure encodes all at top_level.
struct EncodingFootprint {
    std::size_t plaintexts = 0;
    std::size_t level_aware_bytes = 0;
    std::size_t full_level_bytes = 0;
    double ratio() const { return static_cast<double>(level_aware_bytes) / static_cast<double>(full_level_bytes); }
};

EncodingFootprint encoding_footprint(const std::vector<PlaintextGroup>& inv, int ring_n, int top_level);

// Visits every plaintext of plaintext_inventory in the same order, with the
// level and scale the pipeline encodes it at. Weight plaintexts carry the
// strategy's pre-rotation.
void for_each_plaintext(const CollapsedParams& params, const PipelinePlan& plan,
                        const std::function<void(const PlaintextGroup&, const PlainVector&)>& fn);

// ---------------------------------------------------------------- templates

template <SlotBackend B>
std::vector<typename B::Ciphertext> avg_pool(B& be, const std::vector<typename B::Ciphertext>& cts,
                                             const PackedLayout& layout)
{
    if ((layout.dim == Dim::Two && layout.map_h < 2) || layout.map_w < 2)
        throw ValidationError("avg_pool: feature map smaller than the window");
    std::vector<typename B::Ciphertext> out;
    for (const auto& c : cts) {
        auto y = be.add(c, be.rot(c, layout.stride));
        if (layout.dim == Dim::Two) y = be.add(y, be.rot(y, layout.stride * layout.pitch));
        out.push_back(std::move(y));
    }
    return out;
}

// Masks each source, moves it to its merge offset and sums groups of n_p;
// one rescale per merged ciphertext.
template <SlotBackend B>
std::vector<typename B::Ciphertext> merge_inputs(B& be, const std::vector<typename B::Ciphertext>& cts,
                                                 const MergeSpec& spec)
{
    if (cts.size() % spec.n_p != 0) throw ValidationError("merge: input count not divisible by load factor");
    std::vector<typename B::Ciphertext> out;
    for (std::size_t g = 0; g < cts.size() / spec.n_p; ++g) {
        typename B::Ciphertext acc;
        for (int m = 0; m < spec.n_p; ++m) {
            auto c = be.rot(be.mult_plain(cts[g * spec.n_p + m], spec.mask), -spec.mu[m]);
            if (acc.empty()) acc = std::move(c);
            else be.add_inplace(acc, c);
        }
        out.push_back(be.rescale(acc));
    }
    return out;
}

template <SlotBackend B>
std::vector<typename B::Ciphertext> fold_outputs(B& be, std::vector<typename B::Ciphertext> cts, const MergeSpec& spec)
{
    for (auto& c : cts)
        for (int v : spec.nu) c = be.add(c, be.rot(c, v));
    return cts;
}

template <SlotBackend B>
std::vector<typename B::Ciphertext> fast_hconv(B& be, const std::vector<typename B::Ciphertext>& cts,
                                               const ConvWeights& w, const MergeSpec& spec, int threads = 0)
{
    return fold_outputs(be, hconv(be, merge_inputs(be, cts, spec), w, threads), spec);
}

// x -> c0 + c1 x + c2 x^2 with two rescales; pts as from activation_pts.
template <SlotBackend B>
typename B::Ciphertext poly_activate(B& be, const typename B::Ciphertext& x, const std::array<PlainVector, 3>& pts)
{
    auto sq = be.rescale(be.mult(x, x));
    auto t = be.mult_plain(sq, pts[2]);
    be.mult_plain_acc(t, be.mod_down(x, sq.level()), pts[1]);
    auto out = be.rescale(t);
    return be.add_plain(out, pts[0]);
}

// Scale of the (c1, c2) plaintexts so both products meet at scale p_{l-1} * s.
struct ActivationScales {
    int c1_level;
    double c1_scale;
    double c2_scale;
    int c0_level;
    double c0_scale;
};

// primes[l] is the prime dropped when rescaling from level l.
ActivationScales activation_scales(const std::vector<double>& primes, int level, double scale);

template <SlotBackend B>
ActivationScales activation_scales(const B& be, int level, double scale)
{
    std::vector<double> primes(static_cast<std::size_t>(std::max(level, 0)) + 1);
    for (int l = 0; l <= level; ++l) primes[l] = be.prime(l);
    return activation_scales(primes, level, scale);
}

// sum_{u<n} rho^{u*d}(x) via halving; odd n peels one term.
template <SlotBackend B>
typename B::Ciphertext rotate_sum(B& be, const typename B::Ciphertext& x, int n, int d)
{
    if (n <= 1) return x;
    if (n % 2 == 0) {
        auto h = rotate_sum(be, x, n / 2, d);
        return be.add(h, be.rot(h, (n / 2) * d));
    }
    auto rest = rotate_sum(be, x, n - 1, d);
    return be.add(x, be.rot(rest, d));
}

template <SlotBackend B>
std::vector<typename B::Ciphertext> global_pool(B& be, const std::vector<typename B::Ciphertext>& cts,
                                                const PackedLayout& layout)
{
    std::vector<typename B::Ciphertext> out;
    for (const auto& c : cts) {
        auto y = rotate_sum(be, c, layout.map_w, layout.stride);
        if (layout.dim == Dim::Two) y = rotate_sum(be, y, layout.map_h, layout.stride * layout.pitch);
        out.push_back(std::move(y));
    }
    return out;
}

template <SlotBackend B>
typename B::Ciphertext fc_layer(B& be, const std::vector<typename B::Ciphertext>& cts, const CollapsedParams& params,
                                const PackedLayout& layout)
{
    const int ell = layout.channels_per_ct, dist = layout.dist();
    if (params.shape.classes > ell) throw ValidationError("more classes than channels per ciphertext");
    const int level = cts.front().level();
    const double scale = be.prime(level);
    typename B::Ciphertext out;
    for (int l = 0; l < ell; ++l) {
        typename B::Ciphertext acc;
        for (std::size_t i = 0; i < cts.size(); ++i)
            be.mult_plain_acc(acc, cts[i], fc_pt(params, layout, static_cast<int>(i), l, level, scale));
        auto r = be.rot(acc, dist * l);
        if (out.empty()) out = std::move(r);
        else be.add_inplace(out, r);
    }
    out = be.rescale(out);
    return be.add_plain(out, fc_bias_pt(params, layout, out.scale()));
}

struct PipelineResult {
    std::vector<ScheduleStep> trace;
};

template <SlotBackend B>
typename B::Ciphertext run_pipeline(B& be, const CollapsedParams& params, const PipelinePlan& plan,
                                    const typename B::Ciphertext& input, PipelineResult* result = nullptr,
                                    int threads = 0)
{
    using Ct = typename B::Ciphertext;
    std::vector<ScheduleStep>* trace = result ? &result->trace : nullptr;
    OpCounters& cnt = be.counters();
    check_step(plan, "input", input.level(), input.scale(), trace);
    std::vector<Ct> cur{input};
    const std::string prev_label = cnt.label();
    for (int t = 1; t <= 3; ++t) {
        const ConvPlan& cp = plan.conv[t - 1];
        const std::string conv = "conv" + std::to_string(t);
        ConvWeights w(params, cp);
        if (plan.mask_level[t - 1] >= 0) {
            const MergeSpec spec = build_merge_spec(cp, plan.mask_level[t - 1], be.prime(plan.mask_level[t - 1]));
            {
                OpCounters::Scope s(cnt, conv + "/pre");
                cur = merge_inputs(be, cur, spec);
            }
            check_step(plan, conv + "/pre", cur.front().level(), cur.front().scale(), trace);
            {
                OpCounters::Scope s(cnt, conv + "/core");
                cur = hconv(be, cur, w, threads);
            }
            OpCounters::Scope s(cnt, conv + "/post");
            cur = fold_outputs(be, std::move(cur), spec);
        } else {
            OpCounters::Scope s(cnt, conv + "/core");
            cur = hconv(be, cur, w, threads);
        }
        check_step(plan, conv, cur.front().level(), cur.front().scale(), trace);
        {
            OpCounters::Scope s(cnt, "act" + std::to_string(t));
            const PackedLayout out_layout = stage_layout(params.shape, plan.slots, t);
            const ActivationScales sc = activation_scales(be, cur.front().level(), cur.front().scale());
            std::vector<Ct> next(cur.size());
            parallel_for(static_cast<int>(cur.size()), threads, [&](int j) {
                const auto pts = activation_pts(params, t, j, out_layout, sc.c1_level, sc.c1_scale, sc.c2_scale,
                                                sc.c0_level, sc.c0_scale);
                next[j] = poly_activate(be, cur[j], pts);
            });
            cur = std::move(next);
        }
        check_step(plan, "act" + std::to_string(t), cur.front().level(), cur.front().scale(), trace);
        if (t < 3) {
            OpCounters::Scope s(cnt, "pool" + std::to_string(t));
            cur = avg_pool(be, cur, stage_layout(params.shape, plan.slots, t));
        }
    }
    std::vector<Ct> pooled_cts;
    {
        OpCounters::Scope s(cnt, "gpool");
        pooled_cts = global_pool(be, cur, plan.final_layout);
    }
    check_step(plan, "gpool", pooled_cts.front().level(), pooled_cts.front().scale(), trace);
    Ct out;
    {
        OpCounters::Scope s(cnt, "fc");
        out = fc_layer(be, pooled_cts, params, plan.final_layout);
    }
    check_step(plan, "fc", out.level(), out.scale(), trace);
    return out;
}

}  // namespace hear
