#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "hear/backend.hpp"
#include "hear/layout.hpp"
#include "hear/model.hpp"

namespace hear {

enum class Strategy { Full, Giant, Baby };

const char* to_string(Strategy s);
Strategy parse_strategy(const std::string& s);

// Packing geometry of one convolution. With n_p > 1 the inputs are merged
// ciphertexts: source m of merged ciphertext g (original input g*n_p + m)
// sits at slot offset offsets[m] from each valid position.
struct ConvPlan {
    int t = 1;
    PackedLayout layout;  // layout of the unmerged input
    int c_in = 0;
    int c_out = 0;
    int n_in = 0;    // unmerged input ciphertexts
    int n_out = 0;
    int l_in = 0;    // extra rotations per input
    int l_out = 0;   // channels per output ciphertext
    int n_p = 1;
    int n_col = 1;
    int n_row = 1;
    std::vector<int> offsets;
    std::vector<std::pair<int, int>> taps;
    std::vector<int> tap_rot;
    Strategy strategy = Strategy::Giant;
    int level = 0;         // level of the input ciphertexts and weight plaintexts
    double pt_scale = 1.0;

    int merged_in() const { return n_in / n_p; }
    int block() const { return layout.block; }
    int taps_count() const { return static_cast<int>(taps.size()); }
    int extra_rot(int l) const { return layout.block * l; }
    // Input channel feeding block `beta` of unmerged input ciphertext `src`.
    int in_channel(int src, int beta) const;

    std::vector<int> hoisted_amounts() const;
    std::vector<int> single_amounts() const;
    // All rotation amounts the core convolution uses (zero excluded).
    std::vector<int> rotations() const;
    nlohmann::json to_json() const;
};

// Builds the plan for conv t of `shape` with load factor n_p.
ConvPlan make_conv_plan(const NetworkShape& shape, int slots, int t, int n_p, Strategy strategy, int level,
                        double pt_scale);

// Merge offsets for load factor n_p at stride s (n_col = min(n_p, s) columns
// by n_p / n_col rows); offset of source m = (m / n_col) * pitch + m % n_col.
void set_merge_geometry(ConvPlan& plan, int n_p);

// Weight plaintexts pt(g, j, k, l), generated on demand from the collapsed
// filters. Slot b*block + pos + offsets[m] holds F[o][i][k] for output channel
// o = j*l_out + b and the input channel that extra rotation l brings to block
// b from source m; out-of-map taps, junk positions and absent channels are 0.
class ConvWeights {
public:
    ConvWeights(const CollapsedParams& params, ConvPlan plan) : params_(&params), plan_(std::move(plan)) {}

    const ConvPlan& plan() const { return plan_; }
    // rho^shift of the plaintext.
    PlainVector pt(int g, int j, int k, int l, int shift = 0) const;
    std::size_t count() const;

private:
    const CollapsedParams* params_;
    ConvPlan plan_;
};

// Same-padding single-channel convolution: sum_k pts[k] * rot(ct, r[k]).
template <SlotBackend B>
typename B::Ciphertext simple_conv(B& be, const typename B::Ciphertext& ct, const std::vector<int>& rot,
                                   const std::vector<PlainVector>& pts)
{
    if (rot.size() != pts.size() || pts.empty()) throw ValidationError("simple_conv: tap plaintexts missing");
    typename B::Ciphertext acc;
    for (std::size_t k = 0; k < pts.size(); ++k) be.mult_plain_acc(acc, be.rot(ct, rot[k]), pts[k]);
    return acc;
}

// Multi-channel homomorphic convolution with one rescale per output.
template <SlotBackend B>
std::vector<typename B::Ciphertext> hconv(B& be, const std::vector<typename B::Ciphertext>& in, const ConvWeights& w,
                                          int threads = 0)
{
    using Ct = typename B::Ciphertext;
    const ConvPlan& p = w.plan();
    if (static_cast<int>(in.size()) != p.merged_in()) throw ValidationError("hconv: wrong number of inputs");
    for (const Ct& c : in)
        if (c.level() != p.level)
            throw ScheduleError("hconv: input at level " + std::to_string(c.level()) + ", planned " +
                                std::to_string(p.level));
    const int taps = p.taps_count(), L = p.l_in, n_out = p.n_out;
    std::vector<Ct> out(n_out);
    switch (p.strategy) {
    case Strategy::Full: {
        std::vector<int> amounts;
        for (int k = 0; k < taps; ++k)
            for (int l = 0; l < L; ++l) amounts.push_back(p.tap_rot[k] + p.extra_rot(l));
        for (int g = 0; g < p.merged_in(); ++g) {
            const std::vector<Ct> r = be.rot_many(in[g], amounts);
            parallel_for(n_out, threads, [&](int j) {
                for (int k = 0; k < taps; ++k)
                    for (int l = 0; l < L; ++l) be.mult_plain_acc(out[j], r[k * L + l], w.pt(g, j, k, l));
            });
        }
        break;
    }
    case Strategy::Giant: {
        std::vector<int> amounts;
        for (int l = 0; l < L; ++l) amounts.push_back(p.extra_rot(l));
        std::vector<std::vector<Ct>> acc(n_out, std::vector<Ct>(taps));
        for (int g = 0; g < p.merged_in(); ++g) {
            const std::vector<Ct> r = be.rot_many(in[g], amounts);
            parallel_for(n_out, threads, [&](int j) {
                for (int k = 0; k < taps; ++k)
                    for (int l = 0; l < L; ++l) be.mult_plain_acc(acc[j][k], r[l], w.pt(g, j, k, l, -p.tap_rot[k]));
            });
        }
        parallel_for(n_out, threads, [&](int j) {
            for (int k = 0; k < taps; ++k) {
                Ct c = be.rot(acc[j][k], p.tap_rot[k]);
                acc[j][k] = Ct{};
                if (out[j].empty()) out[j] = std::move(c);
                else be.add_inplace(out[j], c);
            }
        });
        break;
    }
    case Strategy::Baby: {
        std::vector<std::vector<Ct>> acc(n_out, std::vector<Ct>(L));
        for (int g = 0; g < p.merged_in(); ++g) {
            const std::vector<Ct> r = be.rot_many(in[g], p.tap_rot);
            parallel_for(n_out, threads, [&](int j) {
                for (int l = 0; l < L; ++l)
                    for (int k = 0; k < taps; ++k) be.mult_plain_acc(acc[j][l], r[k], w.pt(g, j, k, l, -p.extra_rot(l)));
            });
        }
        parallel_for(n_out, threads, [&](int j) {
            for (int l = 0; l < L; ++l) {
                Ct c = be.rot(acc[j][l], p.extra_rot(l));
                acc[j][l] = Ct{};
                if (out[j].empty()) out[j] = std::move(c);
                else be.add_inplace(out[j], c);
            }
        });
        break;
    }
    }
    parallel_for(n_out, threads, [&](int j) { out[j] = be.rescale(out[j]); });
    return out;
}

}  // namespace hear
