#pragma once

#include <cstdint>
#include <vector>

namespace hear::ckks {

using u64 = std::uint64_t;
using u128 = unsigned __int128;

// Word-sized prime modulus (< 2^62) with Barrett constants floor(2^128 / p).
struct Modulus {
    u64 p = 0;
    u64 ratio_lo = 0;
    u64 ratio_hi = 0;

    Modulus() = default;
    explicit Modulus(u64 value);

    u64 reduce128(u128 x) const
    {
        const u64 lo = static_cast<u64>(x), hi = static_cast<u64>(x >> 64);
        const u64 carry = static_cast<u64>((static_cast<u128>(lo) * ratio_lo) >> 64);
        u128 t = static_cast<u128>(lo) * ratio_hi;
        u64 t1 = static_cast<u64>(t) + carry;
        const u64 t3 = static_cast<u64>(t >> 64) + (t1 < carry);
        t = static_cast<u128>(hi) * ratio_lo;
        const u64 t1b = t1 + static_cast<u64>(t);
        const u64 carry2 = static_cast<u64>(t >> 64) + (t1b < t1);
        const u64 q = hi * ratio_hi + t3 + carry2;
        u64 r = lo - q * p;
        return r >= p ? r - p : r;
    }
    u64 reduce(u64 x) const { return x >= p ? x % p : x; }
    u64 mul(u64 a, u64 b) const { return reduce128(static_cast<u128>(a) * b); }
    u64 add(u64 a, u64 b) const
    {
        u64 s = a + b;
        return s >= p ? s - p : s;
    }
    u64 sub(u64 a, u64 b) const { return a >= b ? a - b : a + p - b; }
    u64 neg(u64 a) const { return a == 0 ? 0 : p - a; }
    u64 pow(u64 a, u64 e) const;
    u64 inv(u64 a) const;
    // Residue of a signed value.
    u64 from_signed(std::int64_t v) const
    {
        if (v >= 0) return static_cast<u64>(v) % p;
        u64 r = static_cast<u64>(-(v + 1)) % p;
        return p - 1 - r;
    }
    // Centered lift into (-p/2, p/2].
    std::int64_t centered(u64 a) const { return a > (p >> 1) ? static_cast<std::int64_t>(a) - static_cast<std::int64_t>(p) : static_cast<std::int64_t>(a); }
};

// Shoup precomputation for multiplying by a fixed operand w.
inline u64 shoup(u64 w, u64 p) { return static_cast<u64>((static_cast<u128>(w) << 64) / p); }

inline u64 mul_shoup(u64 x, u64 w, u64 ws, u64 p)
{
    const u64 q = static_cast<u64>((static_cast<u128>(x) * ws) >> 64);
    u64 r = x * w - q * p;
    return r >= p ? r - p : r;
}

bool is_prime(u64 n);

// `count` distinct primes congruent to 1 mod 2n, strictly below 2^bits, taken
// downward from 2^bits and skipping anything listed in `avoid`.
std::vector<u64> ntt_primes(int bits, int count, u64 two_n, const std::vector<u64>& avoid = {});

// Primitive 2n-th root of unity modulo p (p = 1 mod 2n).
u64 primitive_root_2n(u64 p, u64 two_n);

}  // namespace hear::ckks
