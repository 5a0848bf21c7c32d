#include "hear/conv.hpp"

#include <algorithm>
#include <set>

namespace hear {

const char* to_string(Strategy s)
{
    switch (s) {
    case Strategy::Full: return "full";
    case Strategy::Giant: return "giant";
    case Strategy::Baby: return "baby";
    }
    return "?";
}

Strategy parse_strategy(const std::string& s)
{
    if (s == "full") return Strategy::Full;
    if (s == "giant") return Strategy::Giant;
    if (s == "baby") return Strategy::Baby;
    throw ValidationError("unknown strategy: " + s);
}

int ConvPlan::in_channel(int src, int beta) const
{
    if (layout.replicas > 1) return beta % layout.true_channels;
    return src * l_out + beta;
}

std::vector<int> ConvPlan::hoisted_amounts() const
{
    std::vector<int> a;
    switch (strategy) {
    case Strategy::Full:
        for (int k = 0; k < taps_count(); ++k)
            for (int l = 0; l < l_in; ++l) a.push_back(tap_rot[k] + extra_rot(l));
        break;
    case Strategy::Giant:
        for (int l = 0; l < l_in; ++l) a.push_back(extra_rot(l));
        break;
    case Strategy::Baby: a = tap_rot; break;
    }
    return a;
}

std::vector<int> ConvPlan::single_amounts() const
{
    std::vector<int> a;
    if (strategy == Strategy::Giant) a = tap_rot;
    if (strategy == Strategy::Baby)
        for (int l = 0; l < l_in; ++l) a.push_back(extra_rot(l));
    return a;
}

std::vector<int> ConvPlan::rotations() const
{
    std::set<int> s;
    for (int v : hoisted_amounts()) s.insert(normalize_rotation(v, layout.slots));
    for (int v : single_amounts()) s.insert(normalize_rotation(v, layout.slots));
    s.erase(0);
    return {s.begin(), s.end()};
}

nlohmann::json ConvPlan::to_json() const
{
    return {{"layer", t},
            {"n_I", n_in},
            {"n_O", n_out},
            {"l_I", l_in},
            {"l_O", l_out},
            {"n_P", n_p},
            {"taps", taps_count()},
            {"tap_rotations", tap_rot},
            {"merge_offsets", offsets},
            {"strategy", to_string(strategy)},
            {"level", level},
            {"rotations", rotations()}};
}

void set_merge_geometry(ConvPlan& plan, int n_p)
{
    const int s = plan.layout.stride;
    if (n_p < 1 || (n_p & (n_p - 1)) != 0) throw ValidationError("load factor must be a power of two");
    if (n_p > 1 && plan.t < 2) throw ValidationError("no merging before the first convolution");
    if (plan.n_in % n_p != 0) throw ValidationError("load factor must divide the input ciphertext count");
    plan.n_p = n_p;
    plan.n_col = std::min(n_p, s);
    plan.n_row = n_p / plan.n_col;
    const int row_cap = plan.layout.dim == Dim::Two ? s : 1;
    if (plan.n_row > row_cap) throw ValidationError("load factor exceeds the junk capacity of the layout");
    plan.offsets.clear();
    for (int m = 0; m < n_p; ++m) plan.offsets.push_back((m / plan.n_col) * plan.layout.pitch + m % plan.n_col);
}

ConvPlan make_conv_plan(const NetworkShape& shape, int slots, int t, int n_p, Strategy strategy, int level,
                        double pt_scale)
{
    if (t < 1 || t > 3) throw ValidationError("layer index out of range");
    ConvPlan p;
    p.t = t;
    p.layout = t == 1 ? input_layout(shape, slots) : stage_layout(shape, slots, t);
    const int l = p.layout.channels_per_ct;
    p.c_in = shape.in_channels(t);
    p.c_out = shape.out_channels(t);
    p.n_in = t == 1 ? 1 : (p.c_in + l - 1) / l;
    p.n_out = (p.c_out + l - 1) / l;
    p.l_in = t == 1 ? p.layout.true_channels : l;
    p.l_out = l;
    p.taps = shape.tap_offsets();
    const int s = p.layout.stride;
    for (auto [a, b] : p.taps) p.tap_rot.push_back(s * (a * p.layout.pitch + b));
    p.strategy = strategy;
    p.level = level;
    p.pt_scale = pt_scale;
    set_merge_geometry(p, n_p);
    return p;
}

PlainVector ConvWeights::pt(int g, int j, int k, int l, int shift) const
{
    const ConvPlan& p = plan_;
    PlainVector v;
    v.slots = p.layout.slots;
    v.level = p.level;
    v.scale = p.pt_scale;
    const auto [a, bb] = p.taps[k];
    const int h = p.layout.map_h, w = p.layout.map_w;
    const int r_lo = std::max(0, -a), r_hi = std::min(h, h - a);
    const int c_lo = std::max(0, -bb), c_hi = std::min(w, w - bb);
    if (r_lo >= r_hi || c_lo >= c_hi) return v;
    const int ell = p.l_out, B = p.block();
    const int row_step = p.layout.position(1, 0) - p.layout.position(0, 0);
    for (int b = 0; b < ell; ++b) {
        const int o = j * ell + b;
        if (o >= p.c_out) continue;
        const int beta = (b + l) % ell;
        for (int m = 0; m < p.n_p; ++m) {
            const int ch = p.in_channel(g * p.n_p + m, beta);
            if (ch >= p.c_in) continue;
            const double wv = params_->filter(p.t, o, ch, k);
            if (wv == 0.0) continue;
            v.add_block(static_cast<std::uint32_t>(b * B + p.layout.position(r_lo, c_lo) + p.offsets[m]),
                        static_cast<std::uint32_t>(c_hi - c_lo), static_cast<std::uint32_t>(p.layout.stride),
                        static_cast<std::uint32_t>(r_hi - r_lo), static_cast<std::uint32_t>(row_step), wv);
        }
    }
    return shift == 0 ? v : v.rotated(shift);
}

std::size_t ConvWeights::count() const
{
    const ConvPlan& p = plan_;
    return static_cast<std::size_t>(p.merged_in()) * p.n_out * p.taps_count() * p.l_in;
}

}  // namespace hear
