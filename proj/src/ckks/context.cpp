#include "hear/ckks/context.hpp"

#include <cmath>
#include <numbers>

#include "hear/common.hpp"

namespace hear::ckks {

double ParameterSet::log2_q() const
{
    double s = 0.0;
    for (u64 p : primes) s += std::log2(static_cast<double>(p));
    return s;
}

std::uint64_t ParameterSet::digest() const
{
    std::uint64_t h = fnv1a(&log_n, sizeof log_n);
    h = fnv1a(primes.data(), primes.size() * sizeof(u64), h);
    h = fnv1a(&special, sizeof special, h);
    return h;
}

std::vector<double> ParameterSet::prime_values() const
{
    std::vector<double> v;
    for (u64 p : primes) v.push_back(static_cast<double>(p));
    return v;
}

nlohmann::json ParameterSet::to_json() const
{
    return {{"profile", profile},       {"log_n", log_n},       {"primes", primes},
            {"special", special},       {"delta_msg", delta_msg}, {"delta_mask", delta_mask},
            {"sigma", sigma},           {"mask_levels", mask_levels}, {"insecure", insecure},
            {"log2_q", log2_q()}};
}

ParameterSet ParameterSet::from_json(const nlohmann::json& j)
{
    ParameterSet p;
    p.profile = j.at("profile");
    p.log_n = j.at("log_n");
    p.primes = j.at("primes").get<std::vector<u64>>();
    p.special = j.at("special");
    p.delta_msg = j.at("delta_msg");
    p.delta_mask = j.at("delta_mask");
    p.sigma = j.value("sigma", 3.2);
    p.mask_levels = j.value("mask_levels", std::vector<int>{});
    p.insecure = j.value("insecure", false);
    return p;
}

ParameterSet custom_params(const std::string& name, int log_n, int q0_bits, const std::vector<int>& level_bits,
                           int special_bits, double delta_msg, double delta_mask, bool insecure)
{
    if (log_n < 3 || log_n > 17) throw ValidationError("ring degree out of range");
    const u64 two_n = u64{2} << log_n;
    std::vector<u64> used;
    auto take = [&](int bits) {
        u64 p = ntt_primes(bits, 1, two_n, used).front();
        used.push_back(p);
        return p;
    };
    ParameterSet ps;
    ps.profile = name;
    ps.log_n = log_n;
    ps.primes.push_back(take(q0_bits));
    for (int b : level_bits) ps.primes.push_back(take(b));
    ps.special = take(special_bits);
    ps.delta_msg = delta_msg;
    ps.delta_mask = delta_mask;
    ps.insecure = insecure;
    for (std::size_t i = 1; i < ps.primes.size(); ++i)
        if (delta_mask > 0.0 && level_bits[i - 1] < q0_bits && std::ldexp(1.0, level_bits[i - 1]) == delta_mask)
            ps.mask_levels.push_back(static_cast<int>(i));
    return ps;
}

ParameterSet gen_params(const std::string& profile)
{
    const std::vector<int> hear_bits(10, 35);
    std::vector<int> fast_bits(12, 31);
    fast_bits[4] = 28;  // p_5
    fast_bits[8] = 28;  // p_9
    if (profile == "hear") return custom_params(profile, 14, 37, hear_bits, 37, std::ldexp(1.0, 35), 0.0, false);
    if (profile == "fast-hear")
        return custom_params(profile, 14, 33, fast_bits, 33, std::ldexp(1.0, 31), std::ldexp(1.0, 28), false);
    if (profile == "toy")
        return custom_params(profile, 12, 33, fast_bits, 33, std::ldexp(1.0, 31), std::ldexp(1.0, 28), true);
    if (profile == "toy-hear") return custom_params(profile, 12, 37, hear_bits, 37, std::ldexp(1.0, 35), 0.0, true);
    throw ValidationError("unknown parameter profile: " + profile);
}

std::uint32_t bit_reverse(std::uint32_t x, int bits)
{
    std::uint32_t r = 0;
    for (int i = 0; i < bits; ++i) r |= ((x >> i) & 1u) << (bits - 1 - i);
    return r;
}

NttTables::NttTables(u64 p, int log_n) : mod_(p), log_n_(log_n), n_(1 << log_n)
{
    const u64 two_n = u64{2} << log_n;
    if ((p - 1) % two_n != 0) throw CryptoError("prime is not 1 mod 2N");
    psi_ = primitive_root_2n(p, two_n);
    const u64 ipsi = mod_.inv(psi_);
    w_.resize(n_);
    iw_.resize(n_);
    ws_.resize(n_);
    iws_.resize(n_);
    u64 pw = 1, ipw = 1;
    std::vector<u64> pows(n_), ipows(n_);
    for (int i = 0; i < n_; ++i) {
        pows[i] = pw;
        ipows[i] = ipw;
        pw = mod_.mul(pw, psi_);
        ipw = mod_.mul(ipw, ipsi);
    }
    for (int i = 0; i < n_; ++i) {
        const std::uint32_t r = bit_reverse(static_cast<std::uint32_t>(i), log_n);
        w_[i] = pows[r];
        iw_[i] = ipows[r];
        ws_[i] = shoup(w_[i], p);
        iws_[i] = shoup(iw_[i], p);
    }
    n_inv_ = mod_.inv(static_cast<u64>(n_));
    n_inv_s_ = shoup(n_inv_, p);
}

void NttTables::forward(u64* a) const
{
    const u64 p = mod_.p, two_p = 2 * p;
    for (int m = 1, t = n_ >> 1; m < n_; m <<= 1, t >>= 1) {
        for (int i = 0; i < m; ++i) {
            const u64 w = w_[m + i], ws = ws_[m + i];
            u64* x = a + 2 * i * t;
            u64* y = x + t;
            for (int j = 0; j < t; ++j) {
                u64 u = x[j];
                if (u >= two_p) u -= two_p;
                const u64 q = static_cast<u64>((static_cast<u128>(y[j]) * ws) >> 64);
                const u64 v = y[j] * w - q * p;
                x[j] = u + v;
                y[j] = u + two_p - v;
            }
        }
    }
    for (int i = 0; i < n_; ++i) {
        u64 v = a[i];
        if (v >= two_p) v -= two_p;
        if (v >= p) v -= p;
        a[i] = v;
    }
}

void NttTables::inverse(u64* a) const
{
    const u64 p = mod_.p, two_p = 2 * p;
    for (int m = n_ >> 1, t = 1; m >= 1; m >>= 1, t <<= 1) {
        for (int i = 0; i < m; ++i) {
            const u64 w = iw_[m + i], ws = iws_[m + i];
            u64* x = a + 2 * i * t;
            u64* y = x + t;
            for (int j = 0; j < t; ++j) {
                const u64 u = x[j], v = y[j];
                u64 s = u + v;
                if (s >= two_p) s -= two_p;
                x[j] = s;
                const u64 d = u + two_p - v;
                const u64 q = static_cast<u64>((static_cast<u128>(d) * ws) >> 64);
                y[j] = d * w - q * p;
            }
        }
    }
    for (int i = 0; i < n_; ++i) a[i] = mul_shoup(a[i], n_inv_, n_inv_s_, p);
}

Context::Context(ParameterSet params) : params_(std::move(params))
{
    const int L = max_level();
    if (L < 0) throw ValidationError("empty modulus chain");
    for (u64 p : params_.primes) ntt_.emplace_back(p, params_.log_n);
    ntt_.emplace_back(params_.special, params_.log_n);
    const u64 P = params_.special;
    for (int i = 0; i <= L; ++i) {
        const Modulus& m = mod(i);
        p_mod_q_.push_back(m.reduce(P));
        p_inv_mod_q_.push_back(m.inv(m.reduce(P)));
    }
    q_inv_.resize(L + 1);
    for (int l = 1; l <= L; ++l)
        for (int j = 0; j < l; ++j) q_inv_[l].push_back(mod(j).inv(mod(j).reduce(params_.primes[l])));

    const u64 m2n = static_cast<u64>(2 * n());
    rot_group_.resize(slots());
    u64 g = 1;
    for (int j = 0; j < slots(); ++j) {
        rot_group_[j] = g;
        g = g * 5 % m2n;
    }
    ksi_.resize(m2n + 1);
    for (u64 k = 0; k <= m2n; ++k) {
        const double ang = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(m2n);
        ksi_[k] = {std::cos(ang), std::sin(ang)};
    }
}

u64 Context::galois_element(int k) const
{
    const int r = ((k % slots()) + slots()) % slots();
    return rot_group_[r];
}

std::vector<std::uint32_t> Context::galois_permutation(u64 g) const
{
    const int N = n();
    const u64 m2n = static_cast<u64>(2 * N);
    std::vector<std::uint32_t> perm(N);
    for (int i = 0; i < N; ++i) {
        const u64 e = 2 * static_cast<u64>(bit_reverse(static_cast<std::uint32_t>(i), params_.log_n)) + 1;
        const u64 eg = e * g % m2n;
        perm[i] = bit_reverse(static_cast<std::uint32_t>((eg - 1) / 2), params_.log_n);
    }
    return perm;
}

}  // namespace hear::ckks
