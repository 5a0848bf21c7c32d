#include "hear/fastpath.hpp"

#include <set>

namespace hear {

const char* to_string(Mode m) { return m == Mode::Hear ? "hear" : "fast"; }

Mode parse_mode(const std::string& s)
{
    if (s == "hear") return Mode::Hear;
    if (s == "fast" || s == "fast-hear") return Mode::Fast;
    throw ValidationError("unknown mode: " + s);
}

int default_start_level(Mode m) { return m == Mode::Hear ? 10 : 12; }

MergeSpec build_merge_spec(const ConvPlan& plan, int mask_level, double mask_scale)
{
    MergeSpec spec;
    spec.n_p = plan.n_p;
    spec.mu = plan.offsets;
    for (int v = 1; v < plan.n_col; v *= 2) spec.nu.push_back(v);
    for (int v = 1; v < plan.n_row; v *= 2) spec.nu.push_back(v * plan.layout.pitch);
    spec.mask = PlainVector::from_dense(valid_mask(plan.layout), mask_level, mask_scale);
    return spec;
}

std::array<PlainVector, 3> activation_pts(const CollapsedParams& params, int t, int j, const PackedLayout& layout,
                                          int c1_level, double c1_scale, double c2_scale, int c0_level,
                                          double c0_scale)
{
    std::array<PlainVector, 3> pts;
    const int levels[3] = {c0_level, c1_level, c1_level};
    const double scales[3] = {c0_scale, c1_scale, c2_scale};
    for (int q = 0; q < 3; ++q) {
        pts[q].slots = layout.slots;
        pts[q].level = levels[q];
        pts[q].scale = scales[q];
    }
    const int ell = layout.channels_per_ct;
    const int c_out = params.shape.out_channels(t);
    for (int b = 0; b < ell; ++b) {
        const int o = j * ell + b;
        if (o >= c_out) continue;
        const auto& c = params.blocks[t - 1].coeff[o];
        for (int q = 0; q < 3; ++q)
            pts[q].add_block(static_cast<std::uint32_t>(b * layout.block), static_cast<std::uint32_t>(layout.map_w),
                             static_cast<std::uint32_t>(layout.stride), static_cast<std::uint32_t>(layout.map_h),
                             static_cast<std::uint32_t>(layout.position(1, 0)), c[q]);
    }
    return pts;
}

PlainVector fc_pt(const CollapsedParams& params, const PackedLayout& layout, int i, int l, int level, double scale)
{
    PlainVector p;
    p.slots = layout.slots;
    p.level = level;
    p.scale = scale;
    const int ell = layout.channels_per_ct, dist = layout.dist();
    const int d_in = params.shape.out_channels(3);
    for (int o = 0; o < params.shape.classes; ++o) {
        const int blk = (o + l) % ell;
        const int ch = i * ell + blk;
        if (ch >= d_in) continue;
        p.add_run(static_cast<std::uint32_t>(blk * dist), 1, 1, params.fc[static_cast<std::size_t>(o) * d_in + ch]);
    }
    return p;
}

PlainVector fc_bias_pt(const CollapsedParams& params, const PackedLayout& layout, double scale)
{
    PlainVector p;
    p.slots = layout.slots;
    p.level = 0;
    p.scale = scale;
    for (int o = 0; o < params.shape.classes; ++o)
        p.add_run(static_cast<std::uint32_t>(o * layout.dist()), 1, 1, params.fc_bias_at(o));
    return p;
}

std::vector<double> extract_logits(const SlotVector& v, const PackedLayout& layout, int classes)
{
    std::vector<double> out;
    for (int o = 0; o < classes; ++o) out.push_back(v.at(static_cast<std::size_t>(o) * layout.dist()));
    return out;
}

namespace {

void rotate_sum_amounts(int n, int d, std::set<int>& out)
{
    if (n <= 1) return;
    if (n % 2 == 0) {
        rotate_sum_amounts(n / 2, d, out);
        out.insert((n / 2) * d);
        return;
    }
    rotate_sum_amounts(n - 1, d, out);
    out.insert(d);
}

}  // namespace

std::map<int, int> PipelinePlan::rotation_keys() const
{
    std::map<int, int> keys;
    auto use = [&](int amount, int level) {
        const int r = normalize_rotation(amount, slots);
        if (r == 0) return;
        auto [it, fresh] = keys.emplace(r, level);
        if (!fresh) it->second = std::max(it->second, level);
    };
    for (int t = 1; t <= 3; ++t) {
        const ConvPlan& cp = conv[t - 1];
        for (int a : cp.rotations()) use(a, cp.level);
        if (mask_level[t - 1] >= 0) {
            for (int m : cp.offsets) use(-m, mask_level[t - 1]);
            const MergeSpec spec = build_merge_spec(cp, mask_level[t - 1], 1.0);
            for (int v : spec.nu) use(v, cp.level - 1);
        }
        if (t < 3) {
            use(cp.layout.stride, cp.level - 3);
            if (shape.dim == Dim::Two) use(cp.layout.stride * cp.layout.pitch, cp.level - 3);
        }
    }
    std::set<int> g;
    rotate_sum_amounts(final_layout.map_w, final_layout.stride, g);
    if (shape.dim == Dim::Two) rotate_sum_amounts(final_layout.map_h, final_layout.stride * final_layout.pitch, g);
    for (int a : g) use(a, fc_level);
    for (int l = 0; l < final_layout.channels_per_ct; ++l) use(final_layout.dist() * l, fc_level);
    return keys;
}

const ScheduleStep& PipelinePlan::expected(const std::string& label) const
{
    for (const auto& s : ladder)
        if (s.label == label) return s;
    throw ScheduleError("unscheduled step: " + label);
}

nlohmann::json PipelinePlan::to_json() const
{
    nlohmann::json j;
    j["network"] = shape.name();
    j["mode"] = to_string(mode);
    j["strategy"] = to_string(strategy);
    j["slots"] = slots;
    j["start_level"] = start_level;
    j["delta"] = delta;
    for (const auto& c : conv) j["conv"].push_back(c.to_json());
    j["mask_levels"] = mask_level;
    j["fc_level"] = fc_level;
    for (const auto& s : ladder) j["ladder"].push_back({{"step", s.label}, {"level", s.level}});
    nlohmann::json keys = nlohmann::json::object();
    for (const auto& [a, l] : rotation_keys()) keys[std::to_string(a)] = l;
    j["rotation_keys"] = keys;
    return j;
}

PipelinePlan compile_pipeline(const NetworkShape& shape, Mode mode, Strategy strategy, int slots,
                              std::vector<double> primes, double delta, std::array<int, 3> load_factors)
{
    shape.validate();
    PipelinePlan p;
    p.shape = shape;
    p.mode = mode;
    p.strategy = strategy;
    p.slots = slots;
    p.delta = delta;
    p.primes = std::move(primes);
    p.start_level = default_start_level(mode);
    if (static_cast<int>(p.primes.size()) - 1 < p.start_level)
        throw ValidationError(std::string("mode ") + to_string(mode) + " needs a chain with L >= " +
                              std::to_string(p.start_level));
    if (shape.classes > channels_per_ct(shape, slots))
        throw ValidationError("more classes than channels per ciphertext");
    int level = p.start_level;
    p.ladder.push_back({"input", level, delta});
    for (int t = 1; t <= 3; ++t) {
        const std::string conv = "conv" + std::to_string(t);
        int n_p = 1;
        if (mode == Mode::Fast && t > 1) {
            const int ell = channels_per_ct(shape, slots);
            const int n_in = (shape.in_channels(t) + ell - 1) / ell;
            n_p = load_factors[t - 1] > 0 ? load_factors[t - 1] : load_factor(t, n_in, shape.dim);
            p.mask_level[t - 1] = level;
            --level;
            p.ladder.push_back({conv + "/pre", level, delta});
        }
        p.conv[t - 1] = make_conv_plan(shape, slots, t, n_p, strategy, level, p.primes[level]);
        --level;
        p.ladder.push_back({conv, level, delta});
        level -= 2;
        p.ladder.push_back({"act" + std::to_string(t), level, delta});
    }
    p.final_layout = stage_layout(shape, slots, 3);
    if (level != 1) throw ScheduleError("level ladder does not end at the FC level");
    p.fc_level = level;
    p.ladder.push_back({"gpool", level, delta});
    p.ladder.push_back({"fc", 0, delta});
    return p;
}

void check_step(const PipelinePlan& plan, const std::string& label, int level, double scale,
                std::vector<ScheduleStep>* trace)
{
    const ScheduleStep& e = plan.expected(label);
    if (trace) trace->push_back({label, level, scale});
    if (level != e.level)
        throw ScheduleError(label + ": level " + std::to_string(level) + ", scheduled " + std::to_string(e.level));
    if (!(std::abs(scale / e.scale - 1.0) <= 1e-9))
        throw ScheduleError(label + ": scale " + std::to_string(scale) + ", scheduled " + std::to_string(e.scale));
}

std::vector<PlaintextGroup> plaintext_inventory(const PipelinePlan& plan)
{
    std::vector<PlaintextGroup> inv;
    for (int t = 1; t <= 3; ++t) {
        const ConvPlan& cp = plan.conv[t - 1];
        if (plan.mask_level[t - 1] >= 0) inv.push_back({"mask", t, plan.mask_level[t - 1], 1});
        const std::size_t weights = static_cast<std::size_t>(cp.merged_in()) * cp.n_out * cp.taps_count() * cp.l_in;
        inv.push_back({"conv", t, cp.level, weights});
        // Output of conv t sits at cp.level - 1; c1, c2 meet it one level
        // lower, c0 is added after the second rescale.
        const std::size_t n_o = static_cast<std::size_t>(cp.n_out);
        inv.push_back({"act", t, cp.level - 2, 2 * n_o});
        inv.push_back({"act", t, cp.level - 3, n_o});
    }
    const std::size_t ell = static_cast<std::size_t>(plan.final_layout.channels_per_ct);
    inv.push_back({"fc", 4, plan.fc_level, ell * static_cast<std::size_t>(plan.conv[2].n_out)});
    inv.push_back({"fc", 4, 0, 1});
    return inv;
}

EncodingFootprint encoding_footprint(const std::vector<PlaintextGroup>& inv, int ring_n, int top_level)
{
    EncodingFootprint f;
    const std::size_t limb = static_cast<std::size_t>(ring_n) * sizeof(std::uint64_t);
    for (const PlaintextGroup& g : inv) {
        f.plaintexts += g.count;
        f.level_aware_bytes += g.count * static_cast<std::size_t>(g.level + 1) * limb;
        f.full_level_bytes += g.count * static_cast<std::size_t>(top_level + 1) * limb;
    }
    return f;
}

ActivationScales activation_scales(const std::vector<double>& primes, int level, double scale)
{
    if (level < 2) throw ScheduleError("activation needs two levels");
    const double sq_scale = scale * scale / primes[level];
    const double s1 = primes[level - 1];
    const double s2 = s1 * scale / sq_scale;
    const double out_scale = sq_scale * s2 / primes[level - 1];
    return {level - 1, s1, s2, level - 2, out_scale};
}

void for_each_plaintext(const CollapsedParams& params, const PipelinePlan& plan,
                        const std::function<void(const PlaintextGroup&, const PlainVector&)>& fn)
{
    const std::vector<PlaintextGroup> inv = plaintext_inventory(plan);
    auto group = [&](const std::string& kind, int layer) -> const PlaintextGroup& {
        for (const PlaintextGroup& g : inv)
            if (g.kind == kind && g.layer == layer) return g;
        throw ValidationError("inventory has no " + kind + " group");
    };
    for (int t = 1; t <= 3; ++t) {
        const ConvPlan& cp = plan.conv[t - 1];
        if (plan.mask_level[t - 1] >= 0) {
            const int ml = plan.mask_level[t - 1];
            fn(group("mask", t), build_merge_spec(cp, ml, plan.primes[ml]).mask);
        }
        const ConvWeights w(params, cp);
        const PlaintextGroup& cg = group("conv", t);
        for (int g = 0; g < cp.merged_in(); ++g)
            for (int j = 0; j < cp.n_out; ++j)
                for (int k = 0; k < cp.taps_count(); ++k)
                    for (int l = 0; l < cp.l_in; ++l) {
                        int shift = 0;
                        if (cp.strategy == Strategy::Giant) shift = -cp.tap_rot[k];
                        if (cp.strategy == Strategy::Baby) shift = -cp.extra_rot(l);
                        fn(cg, w.pt(g, j, k, l, shift));
                    }
        const ActivationScales sc = activation_scales(plan.primes, cp.level - 1, plan.delta);
        const PackedLayout out_layout = stage_layout(params.shape, plan.slots, t);
        PlaintextGroup c12, c0;
        for (const PlaintextGroup& g : inv)
            if (g.kind == "act" && g.layer == t) (g.level == sc.c1_level ? c12 : c0) = g;
        for (int j = 0; j < cp.n_out; ++j) {
            const auto pts = activation_pts(params, t, j, out_layout, sc.c1_level, sc.c1_scale, sc.c2_scale,
                                            sc.c0_level, sc.c0_scale);
            fn(c12, pts[1]);
            fn(c12, pts[2]);
            fn(c0, pts[0]);
        }
    }
    const PackedLayout& fl = plan.final_layout;
    const double fc_scale = plan.primes[plan.fc_level];
    PlaintextGroup diag, bias;
    for (const PlaintextGroup& g : inv)
        if (g.kind == "fc") (g.level == 0 ? bias : diag) = g;
    for (int l = 0; l < fl.channels_per_ct; ++l)
        for (int i = 0; i < plan.conv[2].n_out; ++i) fn(diag, fc_pt(params, fl, i, l, plan.fc_level, fc_scale));
    fn(bias, fc_bias_pt(params, fl, plan.delta));
}

}  // namespace hear
