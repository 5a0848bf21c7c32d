#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hear/common.hpp"

namespace hear {

// T x J x 2 skeleton tensor, stored as values[(t * J + j) * 2 + c].
struct InputTensor {
    int frames = 0;
    int joints = 0;
    std::vector<double> values;

    static InputTensor zeros(int frames, int joints);

    double at(int t, int j, int c) const { return values[(static_cast<std::size_t>(t) * joints + j) * 2 + c]; }
    double& at(int t, int j, int c) { return values[(static_cast<std::size_t>(t) * joints + j) * 2 + c]; }
};

struct Extent {
    int rows = 0;
    int cols = 0;

    int size() const { return rows * cols; }
    bool operator==(const Extent&) const = default;
};

// One stride-2 pooling step with floor division; 1D maps keep a single row.
Extent pooled(Extent e, Dim dim);

struct NetworkShape {
    Dim dim = Dim::Two;
    int frames = 32;
    int joints = 15;
    std::array<int, 3> widths{128, 256, 512};
    int classes = 10;

    static constexpr int kInChannels = 2;

    int taps() const { return dim == Dim::Two ? 9 : 3; }
    int in_channels(int t) const { return t == 1 ? kInChannels : widths[t - 2]; }
    int out_channels(int t) const { return widths[t - 1]; }
    // Pool window area applied after block t (no pooling after the last block).
    int pool_area(int t) const { return t == 3 ? 1 : (dim == Dim::Two ? 4 : 2); }

    // Extent of the feature map consumed and produced by conv t (t = 1..3).
    Extent map(int t) const;
    Extent final_map() const { return map(3); }

    // Kernel offsets (row, col) in tap order k = 0..taps-1.
    std::vector<std::pair<int, int>> tap_offsets() const;

    void validate() const;
    std::string name() const;

    // "1d-w64", "1d-w128", "2d-w64", "2d-w128", or a custom shape in the
    // form printed by name(), e.g. "2d-w8-8x5-c4".
    static NetworkShape named(const std::string& id);
};

struct RawBlock {
    std::vector<double> filters;  // [o][i][k]
    std::vector<double> bias;
    std::vector<double> bn_mean;
    std::vector<double> bn_std;
    std::vector<double> bn_gamma;
    std::vector<double> bn_beta;
    std::array<double, 3> act{0.0, 1.0, 0.0};
};

struct RawParams {
    NetworkShape shape;
    std::array<RawBlock, 3> blocks;
    std::vector<double> fc;       // [d_O][d_I]
    std::vector<double> fc_bias;  // empty means zero

    void validate() const;
};

struct CollapsedBlock {
    std::vector<double> filters;               // [o][i][k]
    std::vector<std::array<double, 3>> coeff;  // per output channel (c0, c1, c2)
};

struct CollapsedParams {
    NetworkShape shape;
    std::array<CollapsedBlock, 3> blocks;
    std::vector<double> fc;  // global average divisor folded in
    std::vector<double> fc_bias;

    void validate() const;
    double filter(int t, int o, int i, int k) const
    {
        const auto& s = shape;
        return blocks[t - 1].filters[(static_cast<std::size_t>(o) * s.in_channels(t) + i) * s.taps() + k];
    }
    double fc_bias_at(int o) const { return fc_bias.empty() ? 0.0 : fc_bias[o]; }
};

std::array<double, 3> collapse_channel(double bias, double mean, double stddev, double gamma, double beta,
                                       const std::array<double, 3>& act, double window);

CollapsedParams collapse_layers(const RawParams& raw);

std::vector<double> infer_clear(const CollapsedParams& params, const InputTensor& x);

// Reference forward pass over the uncollapsed layers.
std::vector<double> forward_raw(const RawParams& raw, const InputTensor& x);

InputTensor random_input(int frames, int joints, std::uint64_t seed);

// Random parameters with moderate activations; the FC layer is rescaled so
// probe logits stay well inside (-1, 1).
RawParams random_raw_params(const NetworkShape& shape, std::uint64_t seed);

struct ModelFile {
    std::optional<RawParams> raw;
    CollapsedParams collapsed;
};

void save_model(const std::string& path, const RawParams& raw);
void save_model(const std::string& path, const CollapsedParams& collapsed);
ModelFile load_model(const std::string& path);

std::uint64_t digest(const std::vector<double>& v);

}  // namespace hear
