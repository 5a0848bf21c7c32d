#include "hear/costmodel.hpp"

#include <bit>
#include <iomanip>
#include <sstream>

namespace hear {

namespace {

using u64 = std::uint64_t;

// H-Rot_k: k amounts on one input, one of them the identity.
void hoisted(OpCounts& c, u64 groups, u64 k)
{
    if (k <= 1) return;
    c.hoisted_groups += groups;
    c.hoisted_total += groups * (k - 1);
}

struct Field {
    const char* name;
    u64 OpCounts::*ptr;
};

constexpr Field kFields[] = {{"rot", &OpCounts::rot},
                             {"hoisted_groups", &OpCounts::hoisted_groups},
                             {"hoisted_total", &OpCounts::hoisted_total},
                             {"mult_plain", &OpCounts::mult_plain},
                             {"rescale", &OpCounts::rescale},
                             {"mult", &OpCounts::mult}};

nlohmann::json modeled_json(const OpCounts& c)
{
    nlohmann::json j;
    for (const Field& f : kFields) j[f.name] = c.*f.ptr;
    return j;
}

}  // namespace

OpCounts ConvCost::total() const
{
    OpCounts t = pre;
    t += core;
    t += post;
    return t;
}

ConvCost predict_conv(const ConvPlan& plan, bool merged)
{
    const u64 n_i = static_cast<u64>(plan.n_in), n_o = static_cast<u64>(plan.n_out);
    const u64 n_p = static_cast<u64>(plan.n_p), f = static_cast<u64>(plan.taps_count());
    const u64 l_i = static_cast<u64>(plan.l_in);
    const u64 groups = n_i / n_p;
    ConvCost c;
    if (merged) {
        c.pre.rot = (n_p - 1) * groups;
        c.pre.mult_plain = n_i;
        c.pre.rescale = groups;
        c.post.rot = n_o * static_cast<u64>(std::bit_width(n_p - 1));
    }
    switch (plan.strategy) {
    case Strategy::Full: hoisted(c.core, groups, f * l_i); break;
    case Strategy::Giant:
        c.core.rot = (f - 1) * n_o;
        hoisted(c.core, groups, l_i);
        break;
    case Strategy::Baby:
        c.core.rot = (l_i - 1) * n_o;
        hoisted(c.core, groups, f);
        break;
    }
    c.core.mult_plain = f * l_i * groups * n_o;
    c.core.rescale = n_o;
    return c;
}

int rotate_sum_rotations(int n)
{
    if (n <= 1) return 0;
    return 1 + rotate_sum_rotations(n % 2 == 0 ? n / 2 : n - 1);
}

std::map<std::string, OpCounts> predict(const PipelinePlan& plan)
{
    std::map<std::string, OpCounts> out;
    const bool two_d = plan.shape.dim == Dim::Two;
    for (int t = 1; t <= 3; ++t) {
        const ConvPlan& cp = plan.conv[t - 1];
        const std::string conv = "conv" + std::to_string(t);
        const bool merged = plan.mask_level[t - 1] >= 0;
        const ConvCost c = predict_conv(cp, merged);
        if (merged) {
            out[conv + "/pre"] = c.pre;
            out[conv + "/post"] = c.post;
        }
        out[conv + "/core"] = c.core;
        const u64 n_o = static_cast<u64>(cp.n_out);
        OpCounts& act = out["act" + std::to_string(t)];
        act.mult = n_o;
        act.mult_plain = 2 * n_o;
        act.rescale = 2 * n_o;
        if (t < 3) out["pool" + std::to_string(t)].rot = n_o * (two_d ? 2 : 1);
    }
    const PackedLayout& fl = plan.final_layout;
    const u64 n_last = static_cast<u64>(plan.conv[2].n_out);
    OpCounts& gp = out["gpool"];
    gp.rot = n_last * static_cast<u64>(rotate_sum_rotations(fl.map_w) + (two_d ? rotate_sum_rotations(fl.map_h) : 0));
    OpCounts& fc = out["fc"];
    const u64 ell = static_cast<u64>(fl.channels_per_ct);
    for (u64 l = 1; l < ell; ++l)
        if (normalize_rotation(static_cast<long>(l) * fl.dist(), fl.slots) != 0) ++fc.rot;
    fc.mult_plain = ell * n_last;
    fc.rescale = 1;
    return out;
}

bool is_extended_label(const std::string& label) { return label.rfind("conv", 0) != 0; }

OpCounts CostReport::predicted_total() const
{
    OpCounts t;
    for (const LayerCost& l : layers) t += l.predicted;
    return t;
}

OpCounts CostReport::measured_total() const
{
    OpCounts t;
    for (const LayerCost& l : layers) t += l.measured;
    return t;
}

CostReport make_report(const PipelinePlan& plan, const OpCounters& measured)
{
    CostReport r;
    r.network = plan.shape.name();
    r.mode = plan.mode;
    r.strategy = plan.strategy;
    r.convs.assign(plan.conv.begin(), plan.conv.end());
    std::map<std::string, OpCounts> pred = predict(plan);
    std::map<std::string, OpCounts> meas = measured.layers();
    meas.erase("unlabeled");
    for (const auto& [k, v] : meas) pred.try_emplace(k);
    const char* order[] = {"conv1/pre", "conv1/core", "conv1/post", "act1", "pool1", "conv2/pre", "conv2/core",
                           "conv2/post", "act2", "pool2", "conv3/pre", "conv3/core", "conv3/post", "act3",
                           "gpool",     "fc"};
    auto push = [&](const std::string& k) {
        auto it = pred.find(k);
        if (it == pred.end()) return;
        auto m = meas.find(k);
        r.layers.push_back({k, is_extended_label(k), it->second, m == meas.end() ? OpCounts{} : m->second});
        pred.erase(it);
    };
    for (const char* k : order) push(k);
    while (!pred.empty()) push(pred.begin()->first);
    return r;
}

nlohmann::json CostReport::to_json() const
{
    nlohmann::json layers_j = nlohmann::json::array();
    for (const LayerCost& l : layers)
        layers_j.push_back({{"label", l.label},
                            {"extended", l.extended},
                            {"predicted", modeled_json(l.predicted)},
                            {"measured", modeled_json(l.measured)}});
    const OpCounts p = predicted_total(), m = measured_total();
    return {{"network", network},
            {"mode", to_string(mode)},
            {"strategy", to_string(strategy)},
            {"layers", layers_j},
            {"total", {{"predicted", modeled_json(p)}, {"measured", modeled_json(m)}, {"rotations", p.rotations()}}}};
}

std::string CostReport::to_table() const
{
    std::ostringstream os;
    os << network << " " << to_string(mode) << " " << to_string(strategy) << "\n";
    os << std::left << std::setw(12) << "layer";
    for (const Field& f : kFields) os << std::right << std::setw(16) << f.name;
    os << "\n";
    auto row = [&](const std::string& name, const OpCounts& p, const OpCounts& m) {
        os << std::left << std::setw(12) << name;
        for (const Field& f : kFields) {
            std::string cell = std::to_string(p.*f.ptr);
            if (m.*f.ptr != p.*f.ptr) cell += "/" + std::to_string(m.*f.ptr);
            os << std::right << std::setw(16) << cell;
        }
        os << "\n";
    };
    for (const LayerCost& l : layers) row(l.label + (l.extended ? "*" : ""), l.predicted, l.measured);
    row("total", predicted_total(), measured_total());
    os << "* extended (non-convolution) counts; a/b marks predicted/measured disagreement\n";
    return os.str();
}

Verdict compare(const CostReport& report)
{
    Verdict v;
    for (const LayerCost& l : report.layers)
        for (const Field& f : kFields)
            if (l.predicted.*f.ptr != l.measured.*f.ptr) {
                v.pass = false;
                v.mismatches.push_back(l.label + " " + f.name + ": predicted " + std::to_string(l.predicted.*f.ptr) +
                                       ", measured " + std::to_string(l.measured.*f.ptr));
            }
    v.breakdown = nlohmann::json::array();
    for (const ConvPlan& cp : report.convs) {
        const std::string conv = "conv" + std::to_string(cp.t);
        nlohmann::json row = {{"layer", conv}, {"n_I", cp.n_in}, {"n_O", cp.n_out}, {"n_P", cp.n_p}};
        for (const char* part : {"pre", "core", "post"}) {
            nlohmann::json cell = nullptr;
            for (const LayerCost& l : report.layers)
                if (l.label == conv + "/" + part) cell = {{"predicted", modeled_json(l.predicted)},
                                                          {"measured", modeled_json(l.measured)}};
            row[part] = cell;
        }
        v.breakdown.push_back(row);
    }
    return v;
}

}  // namespace hear
