#include "hear/sim.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

namespace hear {

namespace {

constexpr double kGrid = 4398046511104.0;  // 2^42
constexpr double kInvGrid = 1.0 / kGrid;

void range_check(double peak)
{
    if (!(peak < SimBackend::kLimit)) throw CryptoError("simulator fixed-point range exceeded");
}

// d[k*st] += round(a[k*st] * w) on the grid. ST > 0 fixes the stride at
// compile time; strided loops keep four independent peaks so the max chain
// does not serialize them.
template <int ST>
double mac_run(const double* a, double* d, std::uint32_t fit, std::uint32_t st, double w, double peak)
{
    const std::uint32_t step = ST > 0 ? static_cast<std::uint32_t>(ST) : st;
    auto one = [&](std::uint32_t k, double& pk) {
        const double prod = std::nearbyint(a[k * step] * w) * kInvGrid;
        const double v = d[k * step] + prod;
        d[k * step] = v;
        pk = std::max(pk, std::max(std::abs(v), std::abs(prod)));
    };
    std::uint32_t k = 0;
    if (ST != 1) {
        double p1 = 0.0, p2 = 0.0, p3 = 0.0;
        for (; k + 4 <= fit; k += 4) {
            one(k, peak);
            one(k + 1, p1);
            one(k + 2, p2);
            one(k + 3, p3);
        }
        peak = std::max(std::max(peak, p1), std::max(p2, p3));
    }
    for (; k < fit; ++k) one(k, peak);
    return peak;
}

// Whole 2D run that does not wrap: rows at a[q*rs], stride ST within a row.
// Peaks of products and sums, split by row parity, form four short chains.
template <int ST>
double mac_block(const double* a, double* d, std::uint32_t count, std::uint32_t rows, std::uint32_t rs, double w,
                 double peak)
{
    double pk[2][2] = {{peak, 0.0}, {0.0, 0.0}};
    for (std::uint32_t q = 0; q < rows; ++q) {
        const double* aq = a + q * rs;
        double* dq = d + q * rs;
        double& pp = pk[q & 1][0];
        double& pv = pk[q & 1][1];
        for (std::uint32_t k = 0; k < count; ++k) {
            const double prod = std::nearbyint(aq[k * ST] * w) * kInvGrid;
            const double v = dq[k * ST] + prod;
            dq[k * ST] = v;
            pp = std::max(pp, std::abs(prod));
            pv = std::max(pv, std::abs(v));
        }
    }
    return std::max(std::max(pk[0][0], pk[0][1]), std::max(pk[1][0], pk[1][1]));
}

double mac_dense(const double* a, const double* w, double* d, std::uint32_t len, double peak)
{
    for (std::uint32_t k = 0; k < len; ++k) {
        const double prod = std::nearbyint(a[k] * w[k]) * kInvGrid;
        const double v = d[k] + prod;
        d[k] = v;
        peak = std::max(peak, std::max(std::abs(v), std::abs(prod)));
    }
    return peak;
}

}  // namespace

SimBackend::SimBackend(int slots, std::vector<double> primes, int threads)
    : slots_(slots), primes_(std::move(primes)), threads_(threads <= 0 ? default_threads() : threads)
{
    if (slots_ < 1 || (slots_ & (slots_ - 1)) != 0) throw ValidationError("slot count must be a power of two");
    if (primes_.empty()) throw ValidationError("empty prime chain");
}

double SimBackend::quantize(double v)
{
    // Bit test: this file is built with finite-math, which folds isfinite away.
    if (((std::bit_cast<std::uint64_t>(v) >> 52) & 0x7ff) == 0x7ff) throw ValidationError("non-finite slot value");
    double q = std::nearbyint(v * kGrid) * kInvGrid;
    range_check(std::abs(q));
    return q;
}

void SimBackend::check_level(int level) const
{
    if (level < 0 || level > max_level()) throw CryptoError("level out of range: " + std::to_string(level));
}

std::vector<double> SimBackend::materialize(const Ciphertext& c) const
{
    if (c.empty()) throw CryptoError("empty ciphertext");
    const std::vector<double>& d = *c.data_;
    if (c.offset_ == 0) return d;
    std::vector<double> v(slots_);
    std::copy(d.begin() + c.offset_, d.end(), v.begin());
    std::copy(d.begin(), d.begin() + c.offset_, v.begin() + (slots_ - c.offset_));
    return v;
}

std::vector<double>& SimBackend::own(Ciphertext& c) const
{
    if (c.offset_ != 0 || c.data_.use_count() > 1) {
        c.data_ = std::make_shared<std::vector<double>>(materialize(c));
        c.offset_ = 0;
    }
    return *c.data_;
}

SimBackend::Ciphertext SimBackend::encrypt(const SlotVector& v, int level, double scale)
{
    check_level(level);
    if (static_cast<int>(v.size()) != slots_) throw ValidationError("slot vector has wrong length");
    if (!(scale > 0.0)) throw CryptoError("scale must be positive");
    Ciphertext c;
    auto d = std::make_shared<std::vector<double>>(slots_);
    for (int i = 0; i < slots_; ++i) (*d)[i] = quantize(v[i]);
    c.data_ = std::move(d);
    c.level_ = level;
    c.scale_ = scale;
    return c;
}

SlotVector SimBackend::decrypt(const Ciphertext& c) const { return materialize(c); }

SimBackend::Ciphertext SimBackend::with_values(const Ciphertext& c, const SlotVector& v) const
{
    Ciphertext out = c;
    auto d = std::make_shared<std::vector<double>>(slots_);
    for (int i = 0; i < slots_; ++i) (*d)[i] = quantize(v[i]);
    out.data_ = std::move(d);
    out.offset_ = 0;
    return out;
}

SimBackend::Ciphertext SimBackend::add(const Ciphertext& a, const Ciphertext& b)
{
    Ciphertext out = a;
    add_inplace(out, b);
    return out;
}

void SimBackend::add_inplace(Ciphertext& acc, const Ciphertext& b)
{
    require_same_level(acc.level_, b.level_, "add");
    require_scale(acc.scale_, b.scale_, "add");
    std::vector<double>& d = own(acc);
    const std::vector<double>& s = *b.data_;
    const int off = b.offset_;
    double peak = 0.0;
    for (int i = 0, j = off; i < slots_; ++i, ++j) {
        if (j == slots_) j = 0;
        d[i] += s[j];
        peak = std::max(peak, std::abs(d[i]));
    }
    range_check(peak);
    counters_.bump(&OpCounts::add);
}

SimBackend::Ciphertext SimBackend::add_plain(const Ciphertext& a, const PlainVector& p)
{
    if (p.level < a.level_) throw CryptoError("add_plain: level-aware encoding violated");
    require_scale(a.scale_, p.scale, "add_plain");
    Ciphertext out = a;
    std::vector<double>& d = own(out);
    for (const Run& r : p.runs) {
        const double q = quantize(r.value);
        for (std::uint32_t row = 0; row < r.rows; ++row)
            for (std::uint32_t n = 0; n < r.count; ++n) {
                double& x = d[r.row(row) + n * r.step];
                x += q;
                range_check(std::abs(x));
            }
    }
    counters_.bump(&OpCounts::add);
    return out;
}

SimBackend::Ciphertext SimBackend::mult(const Ciphertext& a, const Ciphertext& b)
{
    require_same_level(a.level_, b.level_, "mult");
    std::vector<double> x = materialize(a);
    std::vector<double> y = materialize(b);
    double peak = 0.0;
    for (int i = 0; i < slots_; ++i) {
        x[i] = std::nearbyint(x[i] * y[i] * kGrid) * kInvGrid;
        peak = std::max(peak, std::abs(x[i]));
    }
    range_check(peak);
    Ciphertext out;
    out.data_ = std::make_shared<std::vector<double>>(std::move(x));
    out.level_ = a.level_;
    out.scale_ = a.scale_ * b.scale_;
    counters_.bump(&OpCounts::mult);
    return out;
}

SimBackend::Ciphertext SimBackend::mult_plain(const Ciphertext& a, const PlainVector& p)
{
    Ciphertext acc;
    mult_plain_acc(acc, a, p);
    return acc;
}

void SimBackend::mult_plain_acc(Ciphertext& acc, const Ciphertext& a, const PlainVector& p)
{
    if (a.empty()) throw CryptoError("empty ciphertext");
    if (p.level < a.level_) throw CryptoError("mult_plain: level-aware encoding violated");
    if (p.slots != slots_) throw ValidationError("plaintext has wrong slot count");
    const double out_scale = a.scale_ * p.scale;
    if (acc.empty()) {
        acc.data_ = std::make_shared<std::vector<double>>(slots_, 0.0);
        acc.offset_ = 0;
        acc.level_ = a.level_;
        acc.scale_ = out_scale;
    } else {
        require_same_level(acc.level_, a.level_, "mult_plain");
        require_scale(acc.scale_, out_scale, "mult_plain");
        counters_.bump(&OpCounts::add);
    }
    std::vector<double>& d = own(acc);
    const double* src = a.data_->data();
    double* dst = d.data();
    const std::uint32_t n = static_cast<std::uint32_t>(slots_);
    const std::uint32_t off = static_cast<std::uint32_t>(a.offset_);
    double peak = 0.0;
    auto row_mac = [&](std::uint32_t x, std::uint32_t left, std::uint32_t st, double w) {
        while (left > 0) {
            std::uint32_t s = x + off;
            if (s >= n) s -= n;
            const std::uint32_t fit = std::min(left, (n - 1 - s) / st + 1);
            switch (st) {
            case 1: peak = mac_run<1>(src + s, dst + x, fit, 1, w, peak); break;
            case 2: peak = mac_run<2>(src + s, dst + x, fit, 2, w, peak); break;
            case 4: peak = mac_run<4>(src + s, dst + x, fit, 4, w, peak); break;
            case 8: peak = mac_run<8>(src + s, dst + x, fit, 8, w, peak); break;
            default: peak = mac_run<0>(src + s, dst + x, fit, st, w, peak); break;
            }
            x += fit * st;
            left -= fit;
        }
    };
    if (p.nonzeros() * 4 >= n) {
        // Dense weights: a zero weight adds an exact zero, and untouched
        // accumulator slots were range checked when written.
        thread_local std::vector<double> wd;
        wd.assign(n, 0.0);
        for (const Run& r : p.runs)
            for (std::uint32_t q = 0; q < r.rows; ++q)
                for (std::uint32_t k = 0, x = r.row(q); k < r.count; ++k, x += r.step) wd[x] += r.value * kGrid;
        peak = mac_dense(src + off, wd.data(), dst, n - off, peak);
        peak = mac_dense(src, wd.data() + (n - off), dst + (n - off), off, peak);
    } else {
        auto block = [&](std::uint32_t from, std::uint32_t x, std::uint32_t count, std::uint32_t st,
                         std::uint32_t rows, std::uint32_t rs, double w) {
            const double* a = src + from;
            double* d = dst + x;
            switch (st) {
            case 1: peak = mac_block<1>(a, d, count, rows, rs, w, peak); break;
            case 2: peak = mac_block<2>(a, d, count, rows, rs, w, peak); break;
            case 4: peak = mac_block<4>(a, d, count, rows, rs, w, peak); break;
            case 8: peak = mac_block<8>(a, d, count, rows, rs, w, peak); break;
            default:
                for (std::uint32_t q = 0; q < rows; ++q) peak = mac_run<0>(a + q * rs, d + q * rs, count, st, w, peak);
            }
        };
        for (const Run& r : p.runs) {
            const double w = r.value * kGrid;
            std::uint32_t s = r.start + off;
            if (s >= n) s -= n;
            const std::uint32_t span = (r.count - 1) * r.step;
            // Source rows before the wrap, straddling it, and after it.
            std::uint32_t q = 0;
            while (q < r.rows && s + q * r.row_step + span < n) ++q;
            if (q > 0) block(s, r.start, r.count, r.step, q, r.row_step, w);
            while (q < r.rows && s + q * r.row_step < n) row_mac(r.row(q++), r.count, r.step, w);
            if (q < r.rows)
                block(s + q * r.row_step - n, r.row(q), r.count, r.step, r.rows - q, r.row_step, w);
        }
    }
    range_check(peak);
    counters_.bump(&OpCounts::mult_plain);
}

SimBackend::Ciphertext SimBackend::rot(const Ciphertext& a, int k)
{
    if (a.empty()) throw CryptoError("empty ciphertext");
    const int r = normalize_rotation(k, slots_);
    Ciphertext out = a;
    if (r == 0) return out;
    out.offset_ = (a.offset_ + r) % slots_;
    counters_.bump(&OpCounts::rot);
    return out;
}

std::vector<SimBackend::Ciphertext> SimBackend::rot_many(const Ciphertext& a, std::span<const int> ks)
{
    if (a.empty()) throw CryptoError("empty ciphertext");
    std::vector<Ciphertext> out;
    out.reserve(ks.size());
    std::uint64_t moved = 0;
    for (int k : ks) {
        const int r = normalize_rotation(k, slots_);
        Ciphertext c = a;
        if (r != 0) {
            c.offset_ = (a.offset_ + r) % slots_;
            ++moved;
        }
        out.push_back(std::move(c));
    }
    counters_.hoisted(moved);
    return out;
}

SimBackend::Ciphertext SimBackend::rescale(const Ciphertext& a)
{
    if (a.empty()) throw CryptoError("empty ciphertext");
    if (a.level_ < 1) throw CryptoError("rescale: modulus exhausted at level 0");
    Ciphertext out = a;
    out.scale_ = a.scale_ / primes_[a.level_];
    out.level_ = a.level_ - 1;
    counters_.bump(&OpCounts::rescale);
    return out;
}

SimBackend::Ciphertext SimBackend::mod_down(const Ciphertext& a, int level)
{
    if (a.empty()) throw CryptoError("empty ciphertext");
    if (level > a.level_ || level < 0) throw CryptoError("mod_down cannot raise the level");
    Ciphertext out = a;
    out.level_ = level;
    return out;
}

static_assert(SlotBackend<SimBackend>);

}  // namespace hear
