#include "hear/backend.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <thread>

namespace hear {

int normalize_rotation(long k, int slots)
{
    long r = k % slots;
    return static_cast<int>(r < 0 ? r + slots : r);
}

void PlainVector::add_run(std::uint32_t start, std::uint32_t count, std::uint32_t step, double value)
{
    add_block(start, count, step, 1, 0, value);
}

void PlainVector::add_block(std::uint32_t start, std::uint32_t count, std::uint32_t step, std::uint32_t rows,
                            std::uint32_t row_step, double value)
{
    if (count == 0 || rows == 0 || value == 0.0) return;
    const std::uint64_t last = static_cast<std::uint64_t>(start) + static_cast<std::uint64_t>(rows - 1) * row_step
                               + static_cast<std::uint64_t>(count - 1) * step;
    if (last >= static_cast<std::uint64_t>(slots)) throw ValidationError("plaintext run exceeds slot count");
    runs.push_back({start, count, step, rows, rows > 1 ? row_step : 0, value});
}

PlainVector PlainVector::from_dense(const SlotVector& v, int level, double scale)
{
    PlainVector p;
    p.slots = static_cast<int>(v.size());
    p.level = level;
    p.scale = scale;
    std::size_t i = 0;
    while (i < v.size()) {
        if (v[i] == 0.0) {
            ++i;
            continue;
        }
        std::size_t j = i + 1;
        while (j < v.size() && v[j] == v[i]) ++j;
        p.runs.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j - i), 1, 1, 0, v[i]});
        i = j;
    }
    return p;
}

SlotVector PlainVector::dense() const
{
    SlotVector v(slots, 0.0);
    for (const Run& r : runs)
        for (std::uint32_t q = 0; q < r.rows; ++q)
            for (std::uint32_t n = 0; n < r.count; ++n) v[r.row(q) + n * r.step] += r.value;
    return v;
}

std::size_t PlainVector::nonzeros() const
{
    std::size_t n = 0;
    for (const Run& r : runs) n += static_cast<std::size_t>(r.count) * r.rows;
    return n;
}

PlainVector PlainVector::rotated(int k) const
{
    PlainVector out;
    out.slots = slots;
    out.level = level;
    out.scale = scale;
    out.runs.reserve(runs.size() + 4);
    const std::uint32_t shift = static_cast<std::uint32_t>(normalize_rotation(-static_cast<long>(k), slots));
    const std::uint32_t n = static_cast<std::uint32_t>(slots);
    for (const Run& r : runs) {
        const std::uint32_t s = (r.start + shift) % n;
        const std::uint32_t span = (r.count - 1) * r.step;
        if (s + (r.rows - 1) * r.row_step + span < n) {
            Run m = r;
            m.start = s;
            out.runs.push_back(m);
            continue;
        }
        // Rows entirely below the wrap, rows straddling it, rows past it.
        std::uint32_t q = 0;
        while (q < r.rows && s + q * r.row_step + span < n) ++q;
        if (q > 0) out.runs.push_back({s, r.count, r.step, q, q > 1 ? r.row_step : 0, r.value});
        while (q < r.rows && s + q * r.row_step < n) {
            const std::uint32_t rs = s + q * r.row_step;
            const std::uint32_t fit = (n - 1 - rs) / r.step + 1;
            out.runs.push_back({rs, fit, r.step, 1, 0, r.value});
            out.runs.push_back({(rs + fit * r.step) - n, r.count - fit, r.step, 1, 0, r.value});
            ++q;
        }
        if (q < r.rows) {
            const std::uint32_t left = r.rows - q;
            out.runs.push_back({s + q * r.row_step - n, r.count, r.step, left, left > 1 ? r.row_step : 0, r.value});
        }
    }
    return out;
}

OpCounts& OpCounts::operator+=(const OpCounts& o)
{
    rot += o.rot;
    hoisted_groups += o.hoisted_groups;
    hoisted_total += o.hoisted_total;
    mult += o.mult;
    mult_plain += o.mult_plain;
    rescale += o.rescale;
    add += o.add;
    return *this;
}

nlohmann::json OpCounts::to_json() const
{
    return {{"rot", rot},   {"hoisted_rot_groups", hoisted_groups}, {"hoisted_rot_total", hoisted_total},
            {"mult", mult}, {"mult_plain", mult_plain},              {"rescale", rescale},
            {"add", add}};
}

void OpCounters::bump(std::uint64_t OpCounts::*field, std::uint64_t n)
{
    std::lock_guard lk(mu_);
    layers_[label_].*field += n;
}

void OpCounters::hoisted(std::uint64_t n)
{
    if (n == 0) return;
    std::lock_guard lk(mu_);
    OpCounts& c = layers_[label_];
    c.hoisted_groups += 1;
    c.hoisted_total += n;
}

void OpCounters::set_label(std::string label)
{
    std::lock_guard lk(mu_);
    label_ = std::move(label);
}

std::string OpCounters::label() const
{
    std::lock_guard lk(mu_);
    return label_;
}

OpCounts OpCounters::total() const
{
    std::lock_guard lk(mu_);
    OpCounts t;
    for (const auto& [k, v] : layers_) t += v;
    return t;
}

OpCounts OpCounters::layer(const std::string& name) const
{
    std::lock_guard lk(mu_);
    auto it = layers_.find(name);
    return it == layers_.end() ? OpCounts{} : it->second;
}

OpCounts OpCounters::prefix(const std::string& p) const
{
    std::lock_guard lk(mu_);
    OpCounts t;
    for (const auto& [k, v] : layers_)
        if (k == p || (k.size() > p.size() && k.compare(0, p.size(), p) == 0 && k[p.size()] == '/')) t += v;
    return t;
}

std::map<std::string, OpCounts> OpCounters::layers() const
{
    std::lock_guard lk(mu_);
    return layers_;
}

nlohmann::json OpCounters::to_json() const
{
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, v] : layers()) j[k] = v.to_json();
    j["total"] = total().to_json();
    return j;
}

void OpCounters::clear()
{
    std::lock_guard lk(mu_);
    layers_.clear();
}

bool scales_match(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(std::abs(a), std::abs(b)); }

void require_same_level(int a, int b, const char* op)
{
    if (a != b)
        throw CryptoError(std::string(op) + ": level mismatch (" + std::to_string(a) + " vs " + std::to_string(b) + ")");
}

void require_scale(double have, double want, const char* op)
{
    if (!scales_match(have, want))
        throw CryptoError(std::string(op) + ": scale mismatch (" + std::to_string(have) + " vs " + std::to_string(want)
                          + ")");
}

int default_threads()
{
    unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : static_cast<int>(n);
}

void parallel_for(int n, int threads, const std::function<void(int)>& body)
{
    if (threads <= 0) threads = default_threads();
    threads = std::min(threads, n);
    if (threads <= 1) {
        for (int i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr err;
    std::mutex err_mu;
    {
        std::vector<std::jthread> pool;
        for (int w = 0; w < threads; ++w)
            pool.emplace_back([&] {
                for (int i = next++; i < n; i = next++) {
                    try {
                        body(i);
                    } catch (...) {
                        std::lock_guard lk(err_mu);
                        if (!err) err = std::current_exception();
                        next = n;
                    }
                }
            });
    }
    if (err) std::rethrow_exception(err);
}

}  // namespace hear
