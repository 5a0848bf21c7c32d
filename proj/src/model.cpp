#include "hear/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <regex>

#include <json.hpp>

namespace hear {

namespace {

struct FMap {
    int ch = 0, h = 0, w = 0;
    std::vector<double> v;

    FMap(int c, int hh, int ww) : ch(c), h(hh), w(ww), v(static_cast<std::size_t>(c) * hh * ww, 0.0) {}
    double* plane(int c) { return v.data() + static_cast<std::size_t>(c) * h * w; }
    const double* plane(int c) const { return v.data() + static_cast<std::size_t>(c) * h * w; }
};

FMap input_map(const NetworkShape& s, const InputTensor& x)
{
    if (x.frames != s.frames || x.joints != s.joints
        || x.values.size() != static_cast<std::size_t>(x.frames) * x.joints * 2)
        throw ValidationError("input tensor shape does not match network");
    Extent e = s.map(1);
    FMap m(2, e.rows, e.cols);
    for (int c = 0; c < 2; ++c)
        for (int t = 0; t < s.frames; ++t)
            for (int j = 0; j < s.joints; ++j) m.plane(c)[t * s.joints + j] = x.at(t, j, c);
    return m;
}

FMap conv_same(const FMap& in, const std::vector<double>& filters, int c_out,
               const std::vector<std::pair<int, int>>& taps)
{
    FMap out(c_out, in.h, in.w);
    const int nt = static_cast<int>(taps.size());
    for (int o = 0; o < c_out; ++o) {
        double* dst = out.plane(o);
        for (int i = 0; i < in.ch; ++i) {
            const double* src = in.plane(i);
            for (int k = 0; k < nt; ++k) {
                double wgt = filters[(static_cast<std::size_t>(o) * in.ch + i) * nt + k];
                if (wgt == 0.0) continue;
                auto [a, b] = taps[k];
                int r0 = std::max(0, -a), r1 = std::min(in.h, in.h - a);
                int c0 = std::max(0, -b), c1 = std::min(in.w, in.w - b);
                for (int r = r0; r < r1; ++r) {
                    double* d = dst + r * in.w;
                    const double* s = src + (r + a) * in.w + b;
                    for (int c = c0; c < c1; ++c) d[c] += wgt * s[c];
                }
            }
        }
    }
    return out;
}

FMap sum_pool(const FMap& in, Dim dim)
{
    Extent e = pooled({in.h, in.w}, dim);
    FMap out(in.ch, e.rows, e.cols);
    for (int c = 0; c < in.ch; ++c) {
        const double* s = in.plane(c);
        double* d = out.plane(c);
        for (int r = 0; r < e.rows; ++r)
            for (int q = 0; q < e.cols; ++q) {
                if (dim == Dim::Two) {
                    const double* p = s + (2 * r) * in.w + 2 * q;
                    d[r * e.cols + q] = (p[0] + p[1]) + (p[in.w] + p[in.w + 1]);
                } else {
                    d[q] = s[2 * q] + s[2 * q + 1];
                }
            }
    }
    return out;
}

std::vector<double> channel_sums(const FMap& m)
{
    std::vector<double> g(m.ch, 0.0);
    for (int c = 0; c < m.ch; ++c) {
        const double* p = m.plane(c);
        double acc = 0.0;
        for (int i = 0; i < m.h * m.w; ++i) acc += p[i];
        g[c] = acc;
    }
    return g;
}

std::vector<double> dense(const std::vector<double>& w, const std::vector<double>& bias, const std::vector<double>& v,
                          int rows)
{
    const int cols = static_cast<int>(v.size());
    std::vector<double> y(rows, 0.0);
    for (int o = 0; o < rows; ++o) {
        double acc = 0.0;
        for (int i = 0; i < cols; ++i) acc += w[static_cast<std::size_t>(o) * cols + i] * v[i];
        y[o] = acc + (bias.empty() ? 0.0 : bias[o]);
    }
    return y;
}

void check_size(const std::vector<double>& v, std::size_t n, const char* what)
{
    if (v.size() != n) throw ValidationError(std::string("dimension mismatch: ") + what);
}

}  // namespace

InputTensor InputTensor::zeros(int frames, int joints)
{
    InputTensor x;
    x.frames = frames;
    x.joints = joints;
    x.values.assign(static_cast<std::size_t>(frames) * joints * 2, 0.0);
    return x;
}

Extent pooled(Extent e, Dim dim)
{
    if (dim == Dim::Two) return {e.rows / 2, e.cols / 2};
    return {e.rows, e.cols / 2};
}

Extent NetworkShape::map(int t) const
{
    Extent e = dim == Dim::Two ? Extent{frames, joints} : Extent{1, frames * joints};
    for (int i = 1; i < t; ++i) e = pooled(e, dim);
    return e;
}

std::vector<std::pair<int, int>> NetworkShape::tap_offsets() const
{
    std::vector<std::pair<int, int>> taps;
    if (dim == Dim::Two) {
        for (int a = -1; a <= 1; ++a)
            for (int b = -1; b <= 1; ++b) taps.emplace_back(a, b);
    } else {
        for (int b = -1; b <= 1; ++b) taps.emplace_back(0, b);
    }
    return taps;
}

void NetworkShape::validate() const
{
    if (frames < 1 || joints < 1) throw ValidationError("frames and joints must be positive");
    if (classes < 1) throw ValidationError("classes must be positive");
    if (widths[0] < 1) throw ValidationError("widths must be positive");
    for (int t = 1; t < 3; ++t)
        if (widths[t] != 2 * widths[t - 1]) throw ValidationError("widths must double from block to block");
    Extent e = map(3);
    if (e.rows < 1 || e.cols < 1) throw ValidationError("feature map vanishes before the last block");
}

std::string NetworkShape::name() const
{
    std::string base = std::string(to_string(dim)) + "-w" + std::to_string(widths[0]);
    if (frames == 32 && joints == 15 && classes == 10 && (widths[0] == 64 || widths[0] == 128)) return base;
    return base + "-" + std::to_string(frames) + "x" + std::to_string(joints) + "-c" + std::to_string(classes);
}

NetworkShape NetworkShape::named(const std::string& id)
{
    static const std::regex re(R"((1d|2d)-w(\d+)(?:-(\d+)x(\d+)-c(\d+))?)");
    std::smatch m;
    if (!std::regex_match(id, m, re)) throw ValidationError("unknown network id: " + id);
    NetworkShape s;
    s.dim = m[1] == "1d" ? Dim::One : Dim::Two;
    auto num = [&](int i) {
        if (m[i].length() > 6) throw ValidationError("network id field too large: " + id);
        return std::stoi(m[i]);
    };
    const int w = num(2);
    s.widths = {w, 2 * w, 4 * w};
    if (m[3].matched) {
        s.frames = num(3);
        s.joints = num(4);
        s.classes = num(5);
    }
    s.validate();
    return s;
}

void RawParams::validate() const
{
    shape.validate();
    for (int t = 1; t <= 3; ++t) {
        const RawBlock& b = blocks[t - 1];
        const std::size_t co = shape.out_channels(t);
        check_size(b.filters, co * shape.in_channels(t) * shape.taps(), "filters");
        check_size(b.bias, co, "bias");
        check_size(b.bn_mean, co, "bn mean");
        check_size(b.bn_std, co, "bn std");
        check_size(b.bn_gamma, co, "bn gamma");
        check_size(b.bn_beta, co, "bn beta");
        for (double s : b.bn_std)
            if (!(s > 0.0)) throw ValidationError("batch-norm std must be positive");
        for (double a : b.act)
            if (!std::isfinite(a)) throw ValidationError("activation coefficients must be finite");
    }
    check_size(fc, static_cast<std::size_t>(shape.classes) * shape.widths[2], "fc");
    if (!fc_bias.empty()) check_size(fc_bias, shape.classes, "fc bias");
}

void CollapsedParams::validate() const
{
    shape.validate();
    for (int t = 1; t <= 3; ++t) {
        const std::size_t co = shape.out_channels(t);
        check_size(blocks[t - 1].filters, co * shape.in_channels(t) * shape.taps(), "filters");
        if (blocks[t - 1].coeff.size() != co) throw ValidationError("dimension mismatch: coefficients");
    }
    check_size(fc, static_cast<std::size_t>(shape.classes) * shape.widths[2], "fc");
    if (!fc_bias.empty()) check_size(fc_bias, shape.classes, "fc bias");
}

std::array<double, 3> collapse_channel(double bias, double mean, double stddev, double gamma, double beta,
                                       const std::array<double, 3>& act, double window)
{
    if (!(stddev > 0.0)) throw ValidationError("batch-norm std must be positive");
    const double d1 = gamma / stddev;
    const double d0 = beta + d1 * (bias - mean);
    const auto [a0, a1, a2] = act;
    return {(a0 + a1 * d0 + a2 * d0 * d0) / window, (a1 * d1 + 2.0 * a2 * d0 * d1) / window,
            (a2 * d1 * d1) / window};
}

CollapsedParams collapse_layers(const RawParams& raw)
{
    raw.validate();
    CollapsedParams out;
    out.shape = raw.shape;
    for (int t = 1; t <= 3; ++t) {
        const RawBlock& b = raw.blocks[t - 1];
        CollapsedBlock& c = out.blocks[t - 1];
        c.filters = b.filters;
        const int co = raw.shape.out_channels(t);
        c.coeff.resize(co);
        for (int o = 0; o < co; ++o)
            c.coeff[o] = collapse_channel(b.bias[o], b.bn_mean[o], b.bn_std[o], b.bn_gamma[o], b.bn_beta[o], b.act,
                                          raw.shape.pool_area(t));
    }
    const double gap = 1.0 / raw.shape.final_map().size();
    out.fc = raw.fc;
    for (double& w : out.fc) w *= gap;
    out.fc_bias = raw.fc_bias;
    return out;
}

std::vector<double> infer_clear(const CollapsedParams& params, const InputTensor& x)
{
    const NetworkShape& s = params.shape;
    FMap m = input_map(s, x);
    const auto taps = s.tap_offsets();
    for (int t = 1; t <= 3; ++t) {
        FMap y = conv_same(m, params.blocks[t - 1].filters, s.out_channels(t), taps);
        for (int o = 0; o < y.ch; ++o) {
            const auto [c0, c1, c2] = params.blocks[t - 1].coeff[o];
            double* p = y.plane(o);
            for (int i = 0; i < y.h * y.w; ++i) p[i] = c0 + c1 * p[i] + c2 * (p[i] * p[i]);
        }
        m = t < 3 ? sum_pool(y, s.dim) : std::move(y);
    }
    return dense(params.fc, params.fc_bias, channel_sums(m), s.classes);
}

std::vector<double> forward_raw(const RawParams& raw, const InputTensor& x)
{
    raw.validate();
    const NetworkShape& s = raw.shape;
    FMap m = input_map(s, x);
    const auto taps = s.tap_offsets();
    for (int t = 1; t <= 3; ++t) {
        const RawBlock& b = raw.blocks[t - 1];
        FMap y = conv_same(m, b.filters, s.out_channels(t), taps);
        for (int o = 0; o < y.ch; ++o) {
            double* p = y.plane(o);
            for (int i = 0; i < y.h * y.w; ++i) {
                double z = (p[i] + b.bias[o] - b.bn_mean[o]) / b.bn_std[o] * b.bn_gamma[o] + b.bn_beta[o];
                p[i] = b.act[0] + b.act[1] * z + b.act[2] * z * z;
            }
        }
        if (t < 3) {
            m = sum_pool(y, s.dim);
            for (double& v : m.v) v /= s.pool_area(t);
        } else {
            m = std::move(y);
        }
    }
    std::vector<double> g = channel_sums(m);
    for (double& v : g) v /= m.h * m.w;
    return dense(raw.fc, raw.fc_bias, g, s.classes);
}

InputTensor random_input(int frames, int joints, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    InputTensor x = InputTensor::zeros(frames, joints);
    for (double& v : x.values) v = u(rng);
    return x;
}

RawParams random_raw_params(const NetworkShape& shape, std::uint64_t seed)
{
    shape.validate();
    std::mt19937_64 rng(seed);
    auto uni = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
    RawParams raw;
    raw.shape = shape;
    for (int t = 1; t <= 3; ++t) {
        RawBlock& b = raw.blocks[t - 1];
        const int co = shape.out_channels(t), ci = shape.in_channels(t);
        const double lim = std::sqrt(3.0 / (ci * shape.taps()));
        b.filters.resize(static_cast<std::size_t>(co) * ci * shape.taps());
        for (double& w : b.filters) w = uni(-lim, lim);
        for (int o = 0; o < co; ++o) {
            b.bias.push_back(uni(-0.1, 0.1));
            b.bn_mean.push_back(uni(-0.2, 0.2));
            b.bn_std.push_back(uni(0.5, 1.0));
            b.bn_gamma.push_back(uni(0.5, 1.0));
            b.bn_beta.push_back(uni(-0.2, 0.2));
        }
        b.act = {uni(-0.1, 0.1), uni(0.5, 1.0), uni(0.05, 0.25)};
    }
    const double lim = std::sqrt(3.0 / shape.widths[2]);
    raw.fc.resize(static_cast<std::size_t>(shape.classes) * shape.widths[2]);
    for (double& w : raw.fc) w = uni(-lim, lim);
    raw.fc_bias.assign(shape.classes, 0.0);
    for (double& v : raw.fc_bias) v = uni(-0.05, 0.05);

    double peak = 0.0;
    for (int p = 0; p < 3; ++p) {
        auto y = forward_raw(raw, random_input(shape.frames, shape.joints, seed * 7919 + 17 + p));
        for (double v : y) peak = std::max(peak, std::abs(v));
    }
    if (peak > 0.0) {
        const double f = 0.6 / peak;
        for (double& w : raw.fc) w *= f;
        for (double& v : raw.fc_bias) v *= f;
    }
    return raw;
}

std::uint64_t digest(const std::vector<double>& v) { return fnv1a(v.data(), v.size() * sizeof(double)); }

namespace {

constexpr char kMagic[8] = {'H', 'E', 'M', 'O', 'D', 'E', 'L', '1'};
constexpr int kModelVersion = 1;

static_assert(std::endian::native == std::endian::little, "model payload is written in host order");

struct TensorSink {
    nlohmann::json index = nlohmann::json::array();
    std::vector<double> payload;

    void add(const std::string& name, const std::vector<double>& v)
    {
        index.push_back({{"name", name}, {"offset", payload.size()}, {"count", v.size()}});
        payload.insert(payload.end(), v.begin(), v.end());
    }
};

nlohmann::json shape_json(const NetworkShape& s)
{
    return {{"dim", to_string(s.dim)}, {"frames", s.frames}, {"joints", s.joints},
            {"widths", s.widths},      {"classes", s.classes}};
}

NetworkShape shape_from_json(const nlohmann::json& j)
{
    NetworkShape s;
    const std::string d = j.at("dim").get<std::string>();
    if (d != "1d" && d != "2d") throw ValidationError("model header: bad dim");
    s.dim = d == "1d" ? Dim::One : Dim::Two;
    s.frames = j.at("frames").get<int>();
    s.joints = j.at("joints").get<int>();
    s.widths = j.at("widths").get<std::array<int, 3>>();
    s.classes = j.at("classes").get<int>();
    return s;
}

void write_container(const std::string& path, nlohmann::json header, const TensorSink& sink)
{
    header["format"] = "hemodel";
    header["version"] = kModelVersion;
    header["tensors"] = sink.index;
    const std::string text = header.dump();
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ValidationError("cannot write " + path);
    f.write(kMagic, sizeof kMagic);
    const std::uint64_t len = text.size();
    f.write(reinterpret_cast<const char*>(&len), sizeof len);
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
    f.write(reinterpret_cast<const char*>(sink.payload.data()),
            static_cast<std::streamsize>(sink.payload.size() * sizeof(double)));
    if (!f) throw ValidationError("write failed: " + path);
}

std::string block_name(int t, const char* field) { return "block" + std::to_string(t) + "." + field; }

}  // namespace

void save_model(const std::string& path, const RawParams& raw)
{
    raw.validate();
    TensorSink sink;
    nlohmann::json acts = nlohmann::json::array();
    for (int t = 1; t <= 3; ++t) {
        const RawBlock& b = raw.blocks[t - 1];
        sink.add(block_name(t, "filters"), b.filters);
        sink.add(block_name(t, "bias"), b.bias);
        sink.add(block_name(t, "bn_mean"), b.bn_mean);
        sink.add(block_name(t, "bn_std"), b.bn_std);
        sink.add(block_name(t, "bn_gamma"), b.bn_gamma);
        sink.add(block_name(t, "bn_beta"), b.bn_beta);
        sink.add(block_name(t, "act"), {b.act.begin(), b.act.end()});
    }
    sink.add("fc", raw.fc);
    sink.add("fc_bias", raw.fc_bias);
    write_container(path, {{"kind", "raw"}, {"shape", shape_json(raw.shape)}}, sink);
}

void save_model(const std::string& path, const CollapsedParams& p)
{
    p.validate();
    TensorSink sink;
    for (int t = 1; t <= 3; ++t) {
        sink.add(block_name(t, "filters"), p.blocks[t - 1].filters);
        std::vector<double> flat;
        for (const auto& c : p.blocks[t - 1].coeff) flat.insert(flat.end(), c.begin(), c.end());
        sink.add(block_name(t, "coeff"), flat);
    }
    sink.add("fc", p.fc);
    sink.add("fc_bias", p.fc_bias);
    write_container(path, {{"kind", "collapsed"}, {"shape", shape_json(p.shape)}}, sink);
}

ModelFile load_model(const std::string& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ValidationError("cannot open model " + path);
    char magic[8];
    std::uint64_t len = 0;
    f.read(magic, sizeof magic);
    f.read(reinterpret_cast<char*>(&len), sizeof len);
    if (!f || std::memcmp(magic, kMagic, sizeof magic) != 0 || len > (1u << 26))
        throw ValidationError("not a model file: " + path);
    std::string text(len, '\0');
    f.read(text.data(), static_cast<std::streamsize>(len));
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(text);
    } catch (const std::exception& e) {
        throw ValidationError(std::string("model header: ") + e.what());
    }
    if (header.value("version", 0) != kModelVersion) throw ValidationError("unsupported model version");
    std::vector<char> rest((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (rest.size() % sizeof(double) != 0) throw ValidationError("truncated model payload");
    std::vector<double> payload(rest.size() / sizeof(double));
    std::memcpy(payload.data(), rest.data(), rest.size());

    auto tensor = [&](const std::string& name) {
        for (const auto& t : header.at("tensors"))
            if (t.at("name") == name) {
                std::size_t off = t.at("offset"), cnt = t.at("count");
                if (off + cnt > payload.size()) throw ValidationError("tensor out of range: " + name);
                return std::vector<double>(payload.begin() + off, payload.begin() + off + cnt);
            }
        throw ValidationError("missing tensor: " + name);
    };

    ModelFile mf;
    const NetworkShape shape = shape_from_json(header.at("shape"));
    const std::string kind = header.at("kind");
    if (kind == "raw") {
        RawParams raw;
        raw.shape = shape;
        for (int t = 1; t <= 3; ++t) {
            RawBlock& b = raw.blocks[t - 1];
            b.filters = tensor(block_name(t, "filters"));
            b.bias = tensor(block_name(t, "bias"));
            b.bn_mean = tensor(block_name(t, "bn_mean"));
            b.bn_std = tensor(block_name(t, "bn_std"));
            b.bn_gamma = tensor(block_name(t, "bn_gamma"));
            b.bn_beta = tensor(block_name(t, "bn_beta"));
            auto a = tensor(block_name(t, "act"));
            if (a.size() != 3) throw ValidationError("activation needs three coefficients");
            b.act = {a[0], a[1], a[2]};
        }
        raw.fc = tensor("fc");
        raw.fc_bias = tensor("fc_bias");
        mf.collapsed = collapse_layers(raw);
        mf.raw = std::move(raw);
    } else if (kind == "collapsed") {
        CollapsedParams& p = mf.collapsed;
        p.shape = shape;
        for (int t = 1; t <= 3; ++t) {
            p.blocks[t - 1].filters = tensor(block_name(t, "filters"));
            auto flat = tensor(block_name(t, "coeff"));
            if (flat.size() % 3 != 0) throw ValidationError("coefficient tensor size");
            for (std::size_t i = 0; i < flat.size(); i += 3)
                p.blocks[t - 1].coeff.push_back({flat[i], flat[i + 1], flat[i + 2]});
        }
        p.fc = tensor("fc");
        p.fc_bias = tensor("fc_bias");
        p.validate();
    } else {
        throw ValidationError("unknown model kind: " + kind);
    }
    return mf;
}

}  // namespace hear
