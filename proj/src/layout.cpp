#include "hear/layout.hpp"

#include <algorithm>

namespace hear {

int pot(int x)
{
    if (x < 1) throw ValidationError("pot needs a positive argument");
    int p = 1;
    while (p < x) p <<= 1;
    return p;
}

std::vector<double> vtm(const std::vector<std::vector<double>>& m)
{
    std::vector<double> v;
    const std::size_t cols = m.empty() ? 0 : m.front().size();
    for (const auto& row : m) {
        if (row.size() != cols) throw ValidationError("ragged matrix");
        v.insert(v.end(), row.begin(), row.end());
    }
    return v;
}

std::vector<std::vector<double>> mtv(const std::vector<double>& v, int rows, int cols)
{
    if (rows < 0 || cols < 0 || v.size() != static_cast<std::size_t>(rows) * cols)
        throw ValidationError("vector size does not match matrix shape");
    std::vector<std::vector<double>> m(rows);
    for (int r = 0; r < rows; ++r) m[r].assign(v.begin() + r * cols, v.begin() + (r + 1) * cols);
    return m;
}

std::vector<int> PackedLayout::valid_positions() const
{
    std::vector<int> pos;
    for (int r = 0; r < map_h; ++r)
        for (int c = 0; c < map_w; ++c) pos.push_back(position(r, c));
    return pos;
}

int channels_per_ct(const NetworkShape& shape, int slots)
{
    const int block = pot(shape.frames * shape.joints);
    if (2 * block > slots) throw ValidationError("input tensor does not fit the slot count");
    return slots / block;
}

PackedLayout stage_layout(const NetworkShape& shape, int slots, int t)
{
    PackedLayout l;
    l.dim = shape.dim;
    l.slots = slots;
    l.block = pot(shape.frames * shape.joints);
    l.channels_per_ct = channels_per_ct(shape, slots);
    l.true_channels = l.channels_per_ct;
    Extent e = shape.map(t);
    l.map_h = e.rows;
    l.map_w = e.cols;
    l.pitch = shape.dim == Dim::Two ? shape.joints : l.block;
    l.stride = 1 << (t - 1);
    return l;
}

PackedLayout input_layout(const NetworkShape& shape, int slots)
{
    PackedLayout l = stage_layout(shape, slots, 1);
    l.true_channels = NetworkShape::kInChannels;
    l.replicas = l.channels_per_ct / NetworkShape::kInChannels;
    return l;
}

PackedLayout after_pool(const PackedLayout& l)
{
    PackedLayout o = l;
    Extent e = pooled({l.map_h, l.map_w}, l.dim);
    if (e.rows < 1 || e.cols < 1) throw ValidationError("feature map too small to pool");
    o.map_h = e.rows;
    o.map_w = e.cols;
    o.stride = l.stride * 2;
    o.replicas = 1;
    o.true_channels = l.channels_per_ct;
    return o;
}

PackedInput pack_input(const InputTensor& x, int slots, Dim dim)
{
    const int n = x.frames * x.joints;
    if (n < 1 || x.values.size() != static_cast<std::size_t>(n) * 2) throw ValidationError("malformed input tensor");
    const int block = pot(n);
    if (2 * block > slots) throw ValidationError("input tensor does not fit the slot count");
    PackedInput p;
    p.slots.assign(slots, 0.0);
    const int reps = slots / (2 * block);
    for (int r = 0; r < reps; ++r)
        for (int c = 0; c < 2; ++c) {
            double* dst = p.slots.data() + (2 * r + c) * block;
            for (int t = 0; t < x.frames; ++t)
                for (int j = 0; j < x.joints; ++j) dst[t * x.joints + j] = x.at(t, j, c);
        }
    NetworkShape s;
    s.dim = dim;
    s.frames = x.frames;
    s.joints = x.joints;
    p.layout = input_layout(s, slots);
    return p;
}

SlotVector valid_mask(const PackedLayout& l)
{
    SlotVector m(l.slots, 0.0);
    const auto pos = l.valid_positions();
    for (int b = 0; b < l.channels_per_ct; ++b)
        for (int p : pos) m[b * l.block + p] = 1.0;
    return m;
}

int load_factor(int t, int n_in, Dim dim)
{
    if (t <= 1) return 1;
    const int s = 1 << (t - 1);
    const int cap = dim == Dim::Two ? s * s : s;
    return std::max(1, std::min(n_in, cap));
}

}  // namespace hear
