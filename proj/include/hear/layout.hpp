#pragma once

#include <utility>
#include <vector>

#include "hear/model.hpp"

namespace hear {

using SlotVector = std::vector<double>;

int pot(int x);

std::vector<double> vtm(const std::vector<std::vector<double>>& m);
std::vector<std::vector<double>> mtv(const std::vector<double>& v, int rows, int cols);

// Slot geometry of one pipeline stage. Every channel owns a block of `block`
// slots; a feature-map entry (r, c) lives at r*stride*pitch + c*stride inside
// its block, i.e. pooled values stay at the top-left slot of their patch.
struct PackedLayout {
    Dim dim = Dim::Two;
    int slots = 0;
    int block = 0;
    int channels_per_ct = 0;
    int replicas = 1;
    int true_channels = 0;
    int map_h = 0;
    int map_w = 0;
    int pitch = 0;
    int stride = 1;

    int dist() const { return slots / channels_per_ct; }
    std::pair<int, int> valid_stride() const { return {dim == Dim::Two ? stride : 1, stride}; }
    int position(int r, int c) const { return r * stride * pitch + c * stride; }
    std::vector<int> valid_positions() const;
    bool operator==(const PackedLayout&) const = default;
};

// Layout of the tensor consumed by conv t (stride 2^(t-1)).
PackedLayout stage_layout(const NetworkShape& shape, int slots, int t);
PackedLayout input_layout(const NetworkShape& shape, int slots);
PackedLayout after_pool(const PackedLayout& l);
int channels_per_ct(const NetworkShape& shape, int slots);

struct PackedInput {
    SlotVector slots;
    PackedLayout layout;
};

PackedInput pack_input(const InputTensor& x, int slots, Dim dim = Dim::Two);

SlotVector valid_mask(const PackedLayout& l);

int load_factor(int t, int n_in, Dim dim);

}  // namespace hear
