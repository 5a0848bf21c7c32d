#include "hear/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace hear {

void JointSequence::validate() const
{
    const std::size_t j = frames.empty() ? 0 : frames.front().size();
    for (const Frame& f : frames) {
        if (f.size() != j) throw ValidationError("joint count differs between frames");
        for (const Joint& p : f)
            if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw ValidationError("non-finite joint coordinate");
    }
}

std::vector<double> frame_scores(const JointSequence& seq)
{
    std::vector<double> s(seq.frames.size(), std::numeric_limits<double>::infinity());
    for (std::size_t i = 1; i < seq.frames.size(); ++i) {
        const Frame& a = seq.frames[i - 1];
        const Frame& b = seq.frames[i];
        double acc = 0.0;
        for (std::size_t j = 0; j < b.size(); ++j) acc += std::hypot(b[j].x - a[j].x, b[j].y - a[j].y);
        s[i] = b.empty() ? 0.0 : acc / static_cast<double>(b.size());
    }
    return s;
}

JointSequence select_frames(const JointSequence& seq, int target, double threshold)
{
    seq.validate();
    if (target < 1 || static_cast<int>(seq.frames.size()) < target)
        throw ValidationError("sequence has fewer frames than requested");
    if (threshold < 0.0) throw ValidationError("threshold must be non-negative");

    const std::vector<double> score = frame_scores(seq);
    const std::size_t n = seq.frames.size();
    std::size_t excess = n - static_cast<std::size_t>(target);
    std::vector<char> drop(n, 0);

    for (std::size_t i = 1; i < n && excess > 0; ++i)
        if (score[i] < threshold) {
            drop[i] = 1;
            --excess;
        }
    if (excess > 0) {
        std::vector<std::size_t> order;
        for (std::size_t i = 0; i < n; ++i)
            if (!drop[i]) order.push_back(i);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return score[a] < score[b]; });
        for (std::size_t i = 0; i < excess; ++i) drop[order[i]] = 1;
    }

    JointSequence out;
    for (std::size_t i = 0; i < n; ++i)
        if (!drop[i]) out.frames.push_back(seq.frames[i]);
    return out;
}

JointSequence normalize(const JointSequence& seq)
{
    seq.validate();
    JointSequence out = seq;
    for (Frame& f : out.frames) {
        if (f.empty()) continue;
        auto axis = [&f](double Joint::*m) {
            double lo = f.front().*m, hi = lo;
            for (const Joint& p : f) {
                lo = std::min(lo, p.*m);
                hi = std::max(hi, p.*m);
            }
            for (Joint& p : f) p.*m = hi > lo ? (p.*m - lo) / (hi - lo) : 0.0;
        };
        axis(&Joint::x);
        axis(&Joint::y);
    }
    return out;
}

InputTensor assemble(const JointSequence& seq)
{
    seq.validate();
    if (seq.frames.empty() || seq.joints() == 0) throw ValidationError("empty joint sequence");
    InputTensor x = InputTensor::zeros(static_cast<int>(seq.frames.size()), seq.joints());
    for (int t = 0; t < x.frames; ++t)
        for (int j = 0; j < x.joints; ++j) {
            x.at(t, j, 0) = seq.frames[t][j].x;
            x.at(t, j, 1) = seq.frames[t][j].y;
        }
    return x;
}

JointSequence frames_from_json_text(const std::string& text)
{
    JointSequence seq;
    try {
        const auto doc = nlohmann::json::parse(text);
        if (!doc.is_array()) throw ValidationError("frames file must be a JSON array");
        for (const auto& fr : doc) {
            Frame f;
            for (const auto& p : fr) {
                if (!p.is_array() || p.size() != 2) throw ValidationError("joint must be an [x, y] pair");
                f.push_back({p[0].get<double>(), p[1].get<double>()});
            }
            seq.frames.push_back(std::move(f));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("frames json: ") + e.what());
    }
    seq.validate();
    return seq;
}

JointSequence read_frames_json(const std::string& path)
{
    std::ifstream f(path);
    if (!f) throw ValidationError("cannot open " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return frames_from_json_text(ss.str());
}

void write_tensor_json(const std::string& path, const InputTensor& x)
{
    nlohmann::json ch = nlohmann::json::array();
    for (int c = 0; c < 2; ++c) {
        nlohmann::json rows = nlohmann::json::array();
        for (int t = 0; t < x.frames; ++t) {
            nlohmann::json row = nlohmann::json::array();
            for (int j = 0; j < x.joints; ++j) row.push_back(x.at(t, j, c));
            rows.push_back(std::move(row));
        }
        ch.push_back(std::move(rows));
    }
    nlohmann::json doc = {{"frames", x.frames}, {"joints", x.joints}, {"channels", std::move(ch)}};
    std::ofstream f(path);
    if (!f) throw ValidationError("cannot write " + path);
    f << doc.dump() << "\n";
}

InputTensor read_tensor_json(const std::string& path)
{
    std::ifstream f(path);
    if (!f) throw ValidationError("cannot open " + path);
    try {
        nlohmann::json doc;
        f >> doc;
        InputTensor x = InputTensor::zeros(doc.at("frames").get<int>(), doc.at("joints").get<int>());
        const auto& ch = doc.at("channels");
        if (ch.size() != 2) throw ValidationError("tensor needs two channels");
        for (int c = 0; c < 2; ++c) {
            if (ch[c].size() != static_cast<std::size_t>(x.frames)) throw ValidationError("tensor row count");
            for (int t = 0; t < x.frames; ++t) {
                if (ch[c][t].size() != static_cast<std::size_t>(x.joints)) throw ValidationError("tensor column count");
                for (int j = 0; j < x.joints; ++j) x.at(t, j, c) = ch[c][t][j].get<double>();
            }
        }
        return x;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("tensor json: ") + e.what());
    }
}

}  // namespace hear
