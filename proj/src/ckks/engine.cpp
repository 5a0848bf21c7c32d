#include "hear/ckks/engine.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include "hear/common.hpp"

namespace hear::ckks {

namespace {

// Plain complex product; avoids the library's NaN/inf recovery path.
inline std::complex<double> cmul(std::complex<double> a, std::complex<double> b)
{
    return {a.real() * b.real() - a.imag() * b.imag(), a.real() * b.imag() + a.imag() * b.real()};
}

// Context indices of the moduli q_0..q_level, optionally followed by P.
std::vector<int> moduli(const Context& ctx, int level, bool special)
{
    std::vector<int> m;
    for (int i = 0; i <= level; ++i) m.push_back(i);
    if (special) m.push_back(ctx.special_index());
    return m;
}

u64 residue(const Modulus& m, std::int64_t v)
{
    if (v >= 0) return static_cast<u64>(v) < m.p ? static_cast<u64>(v) : m.reduce128(static_cast<u64>(v));
    const u64 a = static_cast<u64>(-(v + 1)) + 1;  // |v| without overflow
    const u64 r = a < m.p ? a : m.reduce128(a);
    return r == 0 ? 0 : m.p - r;
}

void check_level(const Context& ctx, int level)
{
    if (level < 0 || level > ctx.max_level()) throw CryptoError("level out of range: " + std::to_string(level));
}

}  // namespace

std::size_t KswKey::bytes() const
{
    std::size_t s = 0;
    for (const auto& v : b) s += v.size() * sizeof(u64);
    for (const auto& v : a) s += v.size() * sizeof(u64);
    return s;
}

std::size_t EvalKeys::bytes() const
{
    std::size_t s = relin.bytes();
    for (const auto& [k, v] : galois) s += v.bytes();
    return s;
}

void ntt_limbs(const Context& ctx, std::vector<u64>& poly, int limbs, int special_at)
{
    const int n = ctx.n();
    for (int i = 0; i < limbs; ++i) ctx.ntt(i == special_at ? ctx.special_index() : i).forward(poly.data() + i * n);
}

std::vector<u64> lift_signed(const Context& ctx, const std::vector<std::int64_t>& v, int limbs, bool with_special)
{
    const int n = ctx.n();
    const int total = limbs + (with_special ? 1 : 0);
    std::vector<u64> out(static_cast<std::size_t>(total) * n);
    for (int i = 0; i < total; ++i) {
        const Modulus& m = ctx.mod(i < limbs ? i : ctx.special_index());
        u64* dst = out.data() + static_cast<std::size_t>(i) * n;
        for (int x = 0; x < n; ++x) dst[x] = residue(m, v[x]);
    }
    ntt_limbs(ctx, out, total, with_special ? limbs : -1);
    return out;
}

// ---------------------------------------------------------------- encoder

void Encoder::fft_special(std::vector<std::complex<double>>& v) const
{
    const int size = static_cast<int>(v.size());
    const int logs = std::countr_zero(static_cast<unsigned>(size));
    for (int i = 0; i < size; ++i) {
        const int j = static_cast<int>(bit_reverse(static_cast<std::uint32_t>(i), logs));
        if (i < j) std::swap(v[i], v[j]);
    }
    const u64 M = static_cast<u64>(2 * ctx_.n());
    const auto& rg = ctx_.rot_group();
    const auto& ksi = ctx_.ksi();
    for (int len = 2; len <= size; len <<= 1) {
        const int lenh = len >> 1;
        const u64 lenq = static_cast<u64>(len) << 2;
        const u64 gap = M / lenq;
        for (int i = 0; i < size; i += len) {
            for (int j = 0; j < lenh; ++j) {
                const u64 idx = (rg[j] % lenq) * gap;
                const std::complex<double> u = v[i + j];
                const std::complex<double> w = cmul(v[i + j + lenh], ksi[idx]);
                v[i + j] = u + w;
                v[i + j + lenh] = u - w;
            }
        }
    }
}

void Encoder::fft_special_inv(std::vector<std::complex<double>>& v) const
{
    const int size = static_cast<int>(v.size());
    const int logs = std::countr_zero(static_cast<unsigned>(size));
    const u64 M = static_cast<u64>(2 * ctx_.n());
    const auto& rg = ctx_.rot_group();
    const auto& ksi = ctx_.ksi();
    for (int len = size; len >= 2; len >>= 1) {
        const int lenh = len >> 1;
        const u64 lenq = static_cast<u64>(len) << 2;
        const u64 gap = M / lenq;
        for (int i = 0; i < size; i += len) {
            for (int j = 0; j < lenh; ++j) {
                const u64 idx = (lenq - (rg[j] % lenq)) * gap;
                const std::complex<double> u = v[i + j] + v[i + j + lenh];
                const std::complex<double> w = cmul(v[i + j] - v[i + j + lenh], ksi[idx]);
                v[i + j] = u;
                v[i + j + lenh] = w;
            }
        }
    }
    for (int i = 0; i < size; ++i) {
        const int j = static_cast<int>(bit_reverse(static_cast<std::uint32_t>(i), logs));
        if (i < j) std::swap(v[i], v[j]);
    }
    const double inv = 1.0 / size;
    for (auto& x : v) x *= inv;
}

Plaintext Encoder::encode(std::span<const double> slots, int level, double scale) const
{
    check_level(ctx_, level);
    const int nh = ctx_.slots(), n = ctx_.n();
    if (static_cast<int>(slots.size()) != nh) throw ValidationError("slot vector has wrong length");
    if (!(scale > 0.0) || !std::isfinite(scale)) throw CryptoError("encoding scale must be positive");
    std::vector<std::complex<double>> u(nh);
    for (int i = 0; i < nh; ++i) u[i] = {slots[i], 0.0};
    fft_special_inv(u);
    std::vector<std::int64_t> coeffs(n);
    constexpr double kMax = 4611686018427387904.0;  // 2^62
    for (int i = 0; i < nh; ++i) {
        const double re = std::nearbyint(u[i].real() * scale), im = std::nearbyint(u[i].imag() * scale);
        if (!(std::abs(re) < kMax) || !(std::abs(im) < kMax)) throw CryptoError("encoding overflow");
        coeffs[i] = static_cast<std::int64_t>(re);
        coeffs[i + nh] = static_cast<std::int64_t>(im);
    }
    Plaintext pt;
    pt.level = level;
    pt.scale = scale;
    pt.data = lift_signed(ctx_, coeffs, level + 1, false);
    return pt;
}

std::vector<double> Encoder::decode(std::span<const double> coeffs, double scale) const
{
    const int nh = ctx_.slots();
    if (static_cast<int>(coeffs.size()) != ctx_.n()) throw ValidationError("coefficient vector has wrong length");
    std::vector<std::complex<double>> u(nh);
    for (int i = 0; i < nh; ++i) u[i] = {coeffs[i] / scale, coeffs[i + nh] / scale};
    fft_special(u);
    std::vector<double> out(nh);
    for (int i = 0; i < nh; ++i) out[i] = u[i].real();
    return out;
}

// ---------------------------------------------------------------- keys

KeyGenerator::KeyGenerator(const Context& ctx, std::uint64_t seed) : ctx_(ctx), rng_(seed) {}

void KeyGenerator::sample_uniform(u64* out, int limb)
{
    std::uniform_int_distribution<u64> dist(0, ctx_.mod(limb).p - 1);
    for (int x = 0; x < ctx_.n(); ++x) out[x] = dist(rng_);
}

void KeyGenerator::sample_gaussian(std::vector<std::int64_t>& e)
{
    const double sigma = ctx_.params().sigma;
    std::normal_distribution<double> dist(0.0, sigma);
    e.resize(ctx_.n());
    for (auto& v : e) {
        double x;
        do x = std::nearbyint(dist(rng_));
        while (std::abs(x) > 6.0 * sigma);
        v = static_cast<std::int64_t>(x);
    }
}

SecretKey KeyGenerator::secret_key()
{
    std::uniform_int_distribution<int> tern(-1, 1);
    std::vector<std::int64_t> s(ctx_.n());
    for (auto& v : s) v = tern(rng_);
    return {lift_signed(ctx_, s, ctx_.max_level() + 1, true)};
}

PublicKey KeyGenerator::public_key(const SecretKey& sk)
{
    const int n = ctx_.n(), limbs = ctx_.max_level() + 1;
    PublicKey pk;
    pk.a.resize(static_cast<std::size_t>(limbs) * n);
    for (int i = 0; i < limbs; ++i) sample_uniform(pk.a.data() + i * n, i);
    std::vector<std::int64_t> e;
    sample_gaussian(e);
    pk.b = lift_signed(ctx_, e, limbs, false);
    for (int i = 0; i < limbs; ++i) {
        const Modulus& m = ctx_.mod(i);
        for (int x = 0; x < n; ++x) {
            const std::size_t k = static_cast<std::size_t>(i) * n + x;
            pk.b[k] = m.sub(pk.b[k], m.mul(pk.a[k], sk.s[k]));
        }
    }
    return pk;
}

KswKey KeyGenerator::switching_key(const SecretKey& sk, const std::vector<u64>& target, int max_level)
{
    const int n = ctx_.n();
    const std::vector<int> mods = moduli(ctx_, max_level, true);
    const int limbs = static_cast<int>(mods.size());
    KswKey key;
    key.max_level = max_level;
    for (int d = 0; d <= max_level; ++d) {
        std::vector<u64> a(static_cast<std::size_t>(limbs) * n);
        for (int j = 0; j < limbs; ++j) sample_uniform(a.data() + j * n, mods[j]);
        std::vector<std::int64_t> e;
        sample_gaussian(e);
        std::vector<u64> b = lift_signed(ctx_, e, max_level + 1, true);
        for (int j = 0; j < limbs; ++j) {
            const Modulus& m = ctx_.mod(mods[j]);
            const u64* s = sk.s.data() + static_cast<std::size_t>(mods[j]) * n;
            u64* bj = b.data() + static_cast<std::size_t>(j) * n;
            const u64* aj = a.data() + static_cast<std::size_t>(j) * n;
            for (int x = 0; x < n; ++x) bj[x] = m.sub(bj[x], m.mul(aj[x], s[x]));
            if (j == d) {
                const u64 pm = ctx_.p_mod_q(d);
                const u64* t = target.data() + static_cast<std::size_t>(d) * n;
                for (int x = 0; x < n; ++x) bj[x] = m.add(bj[x], m.mul(pm, t[x]));
            }
        }
        key.b.push_back(std::move(b));
        key.a.push_back(std::move(a));
    }
    return key;
}

KswKey KeyGenerator::relin_key(const SecretKey& sk)
{
    const int n = ctx_.n(), limbs = ctx_.max_level() + 1;
    std::vector<u64> s2(static_cast<std::size_t>(limbs) * n);
    for (int i = 0; i < limbs; ++i)
        for (int x = 0; x < n; ++x) {
            const std::size_t k = static_cast<std::size_t>(i) * n + x;
            s2[k] = ctx_.mod(i).mul(sk.s[k], sk.s[k]);
        }
    return switching_key(sk, s2, ctx_.max_level());
}

KswKey KeyGenerator::galois_key(const SecretKey& sk, int amount, int max_level)
{
    check_level(ctx_, max_level);
    const int n = ctx_.n();
    const auto perm = ctx_.galois_permutation(ctx_.galois_element(amount));
    std::vector<u64> t(static_cast<std::size_t>(max_level + 1) * n);
    for (int i = 0; i <= max_level; ++i)
        for (int x = 0; x < n; ++x)
            t[static_cast<std::size_t>(i) * n + x] = sk.s[static_cast<std::size_t>(i) * n + perm[x]];
    return switching_key(sk, t, max_level);
}

// ---------------------------------------------------------------- encryption

Encryptor::Encryptor(const Context& ctx, PublicKey pk, std::uint64_t seed) : ctx_(ctx), pk_(std::move(pk)), rng_(seed)
{
}

Ciphertext Encryptor::encrypt(const Plaintext& pt)
{
    check_level(ctx_, pt.level);
    const int n = ctx_.n(), limbs = pt.level + 1;
    std::vector<std::int64_t> u(n), e0(n), e1(n);
    {
        std::lock_guard lk(mu_);
        std::uniform_int_distribution<int> tern(-1, 1);
        std::normal_distribution<double> g(0.0, ctx_.params().sigma);
        const double lim = 6.0 * ctx_.params().sigma;
        auto gauss = [&] {
            double x;
            do x = std::nearbyint(g(rng_));
            while (std::abs(x) > lim);
            return static_cast<std::int64_t>(x);
        };
        for (int x = 0; x < n; ++x) {
            u[x] = tern(rng_);
            e0[x] = gauss();
            e1[x] = gauss();
        }
    }
    const std::vector<u64> un = lift_signed(ctx_, u, limbs, false);
    Ciphertext ct;
    ct.level_ = pt.level;
    ct.scale_ = pt.scale;
    ct.c0 = lift_signed(ctx_, e0, limbs, false);
    ct.c1 = lift_signed(ctx_, e1, limbs, false);
    for (int i = 0; i < limbs; ++i) {
        const Modulus& m = ctx_.mod(i);
        for (int x = 0; x < n; ++x) {
            const std::size_t k = static_cast<std::size_t>(i) * n + x;
            ct.c0[k] = m.add(m.add(ct.c0[k], m.mul(pk_.b[k], un[k])), pt.data[k]);
            ct.c1[k] = m.add(ct.c1[k], m.mul(pk_.a[k], un[k]));
        }
    }
    return ct;
}

Ciphertext encrypt_symmetric(const Context& ctx, const SecretKey& sk, const Plaintext& pt, std::uint64_t seed)
{
    check_level(ctx, pt.level);
    const int n = ctx.n(), limbs = pt.level + 1;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, ctx.params().sigma);
    std::vector<std::int64_t> e(n);
    for (auto& v : e) {
        double x;
        do x = std::nearbyint(g(rng));
        while (std::abs(x) > 6.0 * ctx.params().sigma);
        v = static_cast<std::int64_t>(x);
    }
    Ciphertext ct;
    ct.level_ = pt.level;
    ct.scale_ = pt.scale;
    ct.c0 = lift_signed(ctx, e, limbs, false);
    ct.c1.resize(static_cast<std::size_t>(limbs) * n);
    for (int i = 0; i < limbs; ++i) {
        const Modulus& m = ctx.mod(i);
        std::uniform_int_distribution<u64> dist(0, m.p - 1);
        for (int x = 0; x < n; ++x) {
            const std::size_t k = static_cast<std::size_t>(i) * n + x;
            ct.c1[k] = dist(rng);
            ct.c0[k] = m.add(m.sub(ct.c0[k], m.mul(ct.c1[k], sk.s[k])), pt.data[k]);
        }
    }
    return ct;
}

Decryptor::Decryptor(const Context& ctx, SecretKey sk) : ctx_(ctx), sk_(std::move(sk))
{
    const int L = ctx.max_level();
    prefix_mod_.assign(L + 1, std::vector<u64>(L + 1, 0));
    prefix_inv_.assign(L + 1, 1);
    for (int i = 0; i <= L; ++i) {
        const Modulus& m = ctx.mod(i);
        u64 acc = 1;
        for (int j = 0; j <= L; ++j) {
            prefix_mod_[j][i] = acc;
            acc = m.mul(acc, m.reduce(ctx.params().primes[j]));
        }
        prefix_inv_[i] = i == 0 ? 1 : m.inv(prefix_mod_[i][i]);
    }
}

std::vector<double> Decryptor::decrypt_coeffs(const Ciphertext& ct) const
{
    if (ct.empty()) throw CryptoError("empty ciphertext");
    check_level(ctx_, ct.level_);
    const int n = ctx_.n(), limbs = ct.level_ + 1;
    std::vector<u64> m(static_cast<std::size_t>(limbs) * n);
    for (int i = 0; i < limbs; ++i) {
        const Modulus& md = ctx_.mod(i);
        for (int x = 0; x < n; ++x) {
            const std::size_t k = static_cast<std::size_t>(i) * n + x;
            m[k] = md.add(ct.c0[k], md.mul(ct.c1[k], sk_.s[k]));
        }
        ctx_.ntt(i).inverse(m.data() + static_cast<std::size_t>(i) * n);
    }
    std::vector<double> out(n);
    std::vector<std::int64_t> digit(limbs);
    for (int x = 0; x < n; ++x) {
        for (int i = 0; i < limbs; ++i) {
            const Modulus& md = ctx_.mod(i);
            u64 partial = 0;
            for (int j = 0; j < i; ++j) partial = md.add(partial, md.mul(residue(md, digit[j]), prefix_mod_[j][i]));
            const u64 t = md.mul(md.sub(m[static_cast<std::size_t>(i) * n + x], partial), prefix_inv_[i]);
            digit[i] = md.centered(t);
        }
        long double v = 0.0L;
        for (int i = limbs - 1; i >= 0; --i) v = v * static_cast<long double>(ctx_.params().primes[i]) + digit[i];
        out[x] = static_cast<double>(v);
    }
    return out;
}

// ---------------------------------------------------------------- evaluator

Evaluator::Evaluator(const Context& ctx, std::shared_ptr<const EvalKeys> keys) : ctx_(ctx), keys_(std::move(keys))
{
    if (!keys_) throw CryptoError("evaluation keys missing");
    for (const auto& [amount, key] : keys_->galois)
        perms_.emplace(amount, ctx_.galois_permutation(ctx_.galois_element(amount)));
}

Ciphertext Evaluator::add(const Ciphertext& a, const Ciphertext& b) const
{
    Ciphertext out = a;
    add_inplace(out, b);
    return out;
}

void Evaluator::add_inplace(Ciphertext& a, const Ciphertext& b) const
{
    if (a.empty() || b.empty()) throw CryptoError("empty ciphertext");
    if (a.level_ != b.level_) throw CryptoError("add: level mismatch");
    const int n = ctx_.n();
    for (int i = 0; i <= a.level_; ++i) {
        const u64 p = ctx_.mod(i).p;
        for (int x = 0; x < n; ++x) {
            const std::size_t k = static_cast<std::size_t>(i) * n + x;
            u64 s0 = a.c0[k] + b.c0[k], s1 = a.c1[k] + b.c1[k];
            a.c0[k] = s0 >= p ? s0 - p : s0;
            a.c1[k] = s1 >= p ? s1 - p : s1;
        }
    }
}

Ciphertext Evaluator::add_plain(const Ciphertext& a, const Plaintext& p) const
{
    if (a.empty()) throw CryptoError("empty ciphertext");
    if (p.level < a.level_) throw CryptoError("add_plain: plaintext level below ciphertext level");
    Ciphertext out = a;
    const int n = ctx_.n();
    for (int i = 0; i <= a.level_; ++i) {
        const Modulus& m = ctx_.mod(i);
        for (int x = 0; x < n; ++x) {
            const std::size_t k = static_cast<std::size_t>(i) * n + x;
            out.c0[k] = m.add(out.c0[k], p.data[k]);
        }
    }
    return out;
}

void Evaluator::mult_plain_acc(Ciphertext& acc, const Ciphertext& a, const Plaintext& p) const
{
    if (a.empty()) throw CryptoError("empty ciphertext");
    if (p.level < a.level_) throw CryptoError("mult_plain: plaintext level below ciphertext level");
    const int n = ctx_.n();
    const bool fresh = acc.empty();
    if (fresh) {
        acc.level_ = a.level_;
        acc.scale_ = a.scale_ * p.scale;
        acc.c0.assign(a.c0.size(), 0);
        acc.c1.assign(a.c1.size(), 0);
    } else if (acc.level_ != a.level_) {
        throw CryptoError("mult_plain: accumulator level mismatch");
    }
    for (int i = 0; i <= a.level_; ++i) {
        const Modulus& m = ctx_.mod(i);
        const std::size_t base = static_cast<std::size_t>(i) * n;
        for (int x = 0; x < n; ++x) {
            const std::size_t k = base + x;
            acc.c0[k] = m.add(acc.c0[k], m.mul(a.c0[k], p.data[k]));
            acc.c1[k] = m.add(acc.c1[k], m.mul(a.c1[k], p.data[k]));
        }
    }
}

Decomposition Evaluator::decompose(const std::vector<u64>& poly, int level) const
{
    const int n = ctx_.n();
    const int targets = level + 2;
    Decomposition d;
    d.level = level;
    d.data.resize(static_cast<std::size_t>(level + 1) * targets * n);
    std::vector<u64> coef(n);
    for (int i = 0; i <= level; ++i) {
        const u64* src = poly.data() + static_cast<std::size_t>(i) * n;
        std::copy(src, src + n, coef.begin());
        ctx_.ntt(i).inverse(coef.data());
        const u64 qi = ctx_.mod(i).p, half = qi >> 1;
        for (int t = 0; t < targets; ++t) {
            u64* dst = d.data.data() + (static_cast<std::size_t>(i) * targets + t) * n;
            if (t == i) {
                std::copy(src, src + n, dst);
                continue;
            }
            const int mi = t <= level ? t : ctx_.special_index();
            const Modulus& m = ctx_.mod(mi);
            const u64 qi_m = m.reduce128(qi);
            for (int x = 0; x < n; ++x) {
                const u64 c = coef[x];
                const u64 r = m.reduce128(c);
                dst[x] = c > half ? m.sub(r, qi_m) : r;
            }
            ctx_.ntt(mi).forward(dst);
        }
    }
    return d;
}

void Evaluator::key_switch(const Decomposition& d, const KswKey& key, const std::uint32_t* perm, std::vector<u64>& u0,
                           std::vector<u64>& u1) const
{
    const int level = d.level, n = ctx_.n();
    if (key.max_level < level) throw CryptoError("key-switching key does not cover level " + std::to_string(level));
    const int targets = level + 2;
    u0.assign(static_cast<std::size_t>(targets) * n, 0);
    u1.assign(static_cast<std::size_t>(targets) * n, 0);
    std::vector<u128> acc0(n), acc1(n);
    for (int t = 0; t < targets; ++t) {
        const int kt = t <= level ? t : key.max_level + 1;
        const Modulus& m = ctx_.mod(t <= level ? t : ctx_.special_index());
        std::fill(acc0.begin(), acc0.end(), 0);
        std::fill(acc1.begin(), acc1.end(), 0);
        for (int i = 0; i <= level; ++i) {
            const u64* src = d.data.data() + (static_cast<std::size_t>(i) * targets + t) * n;
            const u64* kb = key.b[i].data() + static_cast<std::size_t>(kt) * n;
            const u64* ka = key.a[i].data() + static_cast<std::size_t>(kt) * n;
            if (perm) {
                for (int x = 0; x < n; ++x) {
                    const u128 v = src[perm[x]];
                    acc0[x] += v * kb[x];
                    acc1[x] += v * ka[x];
                }
            } else {
                for (int x = 0; x < n; ++x) {
                    const u128 v = src[x];
                    acc0[x] += v * kb[x];
                    acc1[x] += v * ka[x];
                }
            }
        }
        u64* o0 = u0.data() + static_cast<std::size_t>(t) * n;
        u64* o1 = u1.data() + static_cast<std::size_t>(t) * n;
        for (int x = 0; x < n; ++x) {
            o0[x] = m.reduce128(acc0[x]);
            o1[x] = m.reduce128(acc1[x]);
        }
    }
    mod_down_p(u0, level);
    mod_down_p(u1, level);
}

void Evaluator::mod_down_p(std::vector<u64>& acc, int level) const
{
    const int n = ctx_.n();
    const int sp = ctx_.special_index();
    const u64 P = ctx_.mod(sp).p, half = P >> 1;
    std::vector<u64> v(acc.begin() + static_cast<std::ptrdiff_t>(level + 1) * n,
                       acc.begin() + static_cast<std::ptrdiff_t>(level + 2) * n);
    ctx_.ntt(sp).inverse(v.data());
    for (auto& x : v) x = x + half >= P ? x + half - P : x + half;
    std::vector<u64> r(n);
    for (int j = 0; j <= level; ++j) {
        const Modulus& m = ctx_.mod(j);
        const u64 half_j = m.reduce128(half);
        for (int x = 0; x < n; ++x) r[x] = m.sub(m.reduce128(v[x]), half_j);
        ctx_.ntt(j).forward(r.data());
        const u64 pinv = ctx_.p_inv_mod_q(j), pinv_s = shoup(pinv, m.p);
        u64* a = acc.data() + static_cast<std::size_t>(j) * n;
        for (int x = 0; x < n; ++x) a[x] = mul_shoup(m.sub(a[x], r[x]), pinv, pinv_s, m.p);
    }
    acc.resize(static_cast<std::size_t>(level + 1) * n);
}

Ciphertext Evaluator::mult(const Ciphertext& a, const Ciphertext& b) const
{
    if (a.empty() || b.empty()) throw CryptoError("empty ciphertext");
    if (a.level_ != b.level_) throw CryptoError("mult: level mismatch");
    const int n = ctx_.n(), level = a.level_;
    Ciphertext out;
    out.level_ = level;
    out.scale_ = a.scale_ * b.scale_;
    out.c0.resize(a.c0.size());
    out.c1.resize(a.c1.size());
    std::vector<u64> d2(a.c0.size());
    for (int i = 0; i <= level; ++i) {
        const Modulus& m = ctx_.mod(i);
        for (int x = 0; x < n; ++x) {
            const std::size_t k = static_cast<std::size_t>(i) * n + x;
            out.c0[k] = m.mul(a.c0[k], b.c0[k]);
            out.c1[k] = m.add(m.mul(a.c0[k], b.c1[k]), m.mul(a.c1[k], b.c0[k]));
            d2[k] = m.mul(a.c1[k], b.c1[k]);
        }
    }
    if (keys_->relin.max_level < 0) throw CryptoError("relinearization key missing");
    std::vector<u64> u0, u1;
    key_switch(decompose(d2, level), keys_->relin, nullptr, u0, u1);
    for (int i = 0; i <= level; ++i) {
        const Modulus& m = ctx_.mod(i);
        for (int x = 0; x < n; ++x) {
            const std::size_t k = static_cast<std::size_t>(i) * n + x;
            out.c0[k] = m.add(out.c0[k], u0[k]);
            out.c1[k] = m.add(out.c1[k], u1[k]);
        }
    }
    return out;
}

bool Evaluator::has_rotation(int amount, int level) const
{
    const int r = ((amount % ctx_.slots()) + ctx_.slots()) % ctx_.slots();
    if (r == 0) return true;
    auto it = keys_->galois.find(r);
    return it != keys_->galois.end() && it->second.max_level >= level;
}

const KswKey& Evaluator::galois(int amount, int level) const
{
    auto it = keys_->galois.find(amount);
    if (it == keys_->galois.end()) throw CryptoError("missing rotation key for amount " + std::to_string(amount));
    if (it->second.max_level < level)
        throw CryptoError("rotation key for amount " + std::to_string(amount) + " does not cover level " +
                          std::to_string(level));
    return it->second;
}

Ciphertext Evaluator::rotate(const Ciphertext& a, int amount) const
{
    return rotate_hoisted(a, std::span<const int>(&amount, 1)).front();
}

std::vector<Ciphertext> Evaluator::rotate_hoisted(const Ciphertext& a, std::span<const int> amounts) const
{
    if (a.empty()) throw CryptoError("empty ciphertext");
    const int n = ctx_.n(), level = a.level_, slots = ctx_.slots();
    std::vector<int> norm;
    bool any = false;
    for (int k : amounts) {
        const int r = ((k % slots) + slots) % slots;
        if (r != 0) {
            galois(r, level);
            any = true;
        }
        norm.push_back(r);
    }
    Decomposition d;
    if (any) d = decompose(a.c1, level);
    std::vector<Ciphertext> out;
    out.reserve(norm.size());
    for (int r : norm) {
        if (r == 0) {
            out.push_back(a);
            continue;
        }
        const std::uint32_t* perm = perms_.at(r).data();
        Ciphertext c;
        c.level_ = level;
        c.scale_ = a.scale_;
        key_switch(d, galois(r, level), perm, c.c0, c.c1);
        for (int i = 0; i <= level; ++i) {
            const Modulus& m = ctx_.mod(i);
            const u64* src = a.c0.data() + static_cast<std::size_t>(i) * n;
            u64* dst = c.c0.data() + static_cast<std::size_t>(i) * n;
            for (int x = 0; x < n; ++x) dst[x] = m.add(dst[x], src[perm[x]]);
        }
        out.push_back(std::move(c));
    }
    return out;
}

Ciphertext Evaluator::rescale(const Ciphertext& a) const
{
    if (a.empty()) throw CryptoError("empty ciphertext");
    if (a.level_ < 1) throw CryptoError("rescale: modulus exhausted at level 0");
    const int n = ctx_.n(), l = a.level_;
    const Modulus& ml = ctx_.mod(l);
    const u64 half = ml.p >> 1;
    Ciphertext out;
    out.level_ = l - 1;
    out.scale_ = a.scale_ / static_cast<double>(ml.p);
    std::vector<u64> last(n), r(n);
    for (const auto* pair : {&a.c0, &a.c1}) {
        const std::vector<u64>& src = *pair;
        std::vector<u64> dst(src.begin(), src.begin() + static_cast<std::ptrdiff_t>(l) * n);
        std::copy(src.begin() + static_cast<std::ptrdiff_t>(l) * n, src.begin() + static_cast<std::ptrdiff_t>(l + 1) * n,
                  last.begin());
        ctx_.ntt(l).inverse(last.data());
        for (auto& x : last) x = x + half >= ml.p ? x + half - ml.p : x + half;
        for (int j = 0; j < l; ++j) {
            const Modulus& m = ctx_.mod(j);
            const u64 half_j = m.reduce128(half);
            for (int x = 0; x < n; ++x) r[x] = m.sub(m.reduce128(last[x]), half_j);
            ctx_.ntt(j).forward(r.data());
            const u64 inv = ctx_.q_inv(l, j), inv_s = shoup(inv, m.p);
            u64* d = dst.data() + static_cast<std::size_t>(j) * n;
            for (int x = 0; x < n; ++x) d[x] = mul_shoup(m.sub(d[x], r[x]), inv, inv_s, m.p);
        }
        (pair == &a.c0 ? out.c0 : out.c1) = std::move(dst);
    }
    return out;
}

Ciphertext Evaluator::mod_down(const Ciphertext& a, int level) const
{
    if (a.empty()) throw CryptoError("empty ciphertext");
    if (level < 0 || level > a.level_) throw CryptoError("mod_down cannot raise the level");
    Ciphertext out;
    out.level_ = level;
    out.scale_ = a.scale_;
    const std::size_t sz = static_cast<std::size_t>(level + 1) * ctx_.n();
    out.c0.assign(a.c0.begin(), a.c0.begin() + static_cast<std::ptrdiff_t>(sz));
    out.c1.assign(a.c1.begin(), a.c1.begin() + static_cast<std::ptrdiff_t>(sz));
    return out;
}

}  // namespace hear::ckks
