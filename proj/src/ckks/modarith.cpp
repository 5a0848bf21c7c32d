#include "hear/ckks/modarith.hpp"

#include <algorithm>
#include <stdexcept>

#include "hear/common.hpp"

namespace hear::ckks {

Modulus::Modulus(u64 value) : p(value)
{
    if (value < 2 || value >= (u64{1} << 62)) throw ValidationError("modulus out of range");
    // floor(2^128 / p) via long division of 2^128 - 1 (p is never a power of two here).
    const u128 max = ~u128{0};
    const u128 q = max / value;
    ratio_lo = static_cast<u64>(q);
    ratio_hi = static_cast<u64>(q >> 64);
}

u64 Modulus::pow(u64 a, u64 e) const
{
    u64 r = 1 % p, b = reduce(a);
    while (e) {
        if (e & 1) r = mul(r, b);
        b = mul(b, b);
        e >>= 1;
    }
    return r;
}

u64 Modulus::inv(u64 a) const
{
    if (reduce(a) == 0) throw CryptoError("inverse of zero");
    return pow(a, p - 2);
}

namespace {

u64 mulmod_any(u64 a, u64 b, u64 m) { return static_cast<u64>(static_cast<u128>(a) * b % m); }

u64 powmod_any(u64 a, u64 e, u64 m)
{
    u64 r = 1 % m;
    a %= m;
    while (e) {
        if (e & 1) r = mulmod_any(r, a, m);
        a = mulmod_any(a, a, m);
        e >>= 1;
    }
    return r;
}

}  // namespace

bool is_prime(u64 n)
{
    if (n < 2) return false;
    for (u64 sp : {2ULL, 3ULL, 5ULL, 7ULL, 11ULL, 13ULL, 17ULL, 19ULL, 23ULL, 29ULL, 31ULL, 37ULL})
        if (n % sp == 0) return n == sp;
    u64 d = n - 1;
    int s = 0;
    while ((d & 1) == 0) {
        d >>= 1;
        ++s;
    }
    for (u64 a : {2ULL, 3ULL, 5ULL, 7ULL, 11ULL, 13ULL, 17ULL, 19ULL, 23ULL, 29ULL, 31ULL, 37ULL}) {
        u64 x = powmod_any(a, d, n);
        if (x == 1 || x == n - 1) continue;
        bool composite = true;
        for (int r = 1; r < s; ++r) {
            x = mulmod_any(x, x, n);
            if (x == n - 1) {
                composite = false;
                break;
            }
        }
        if (composite) return false;
    }
    return true;
}

std::vector<u64> ntt_primes(int bits, int count, u64 two_n, const std::vector<u64>& avoid)
{
    if (bits < 10 || bits > 61) throw ValidationError("prime bit size out of range");
    std::vector<u64> out;
    const u64 top = u64{1} << bits;
    u64 c = top - two_n + 1;  // largest value = 1 mod 2n below 2^bits
    const u64 floor = u64{1} << (bits - 1);
    while (static_cast<int>(out.size()) < count && c > floor) {
        if (is_prime(c) && std::find(avoid.begin(), avoid.end(), c) == avoid.end()) out.push_back(c);
        c -= two_n;
    }
    if (static_cast<int>(out.size()) < count)
        throw ValidationError("no NTT prime found in range for " + std::to_string(bits) + " bits");
    return out;
}

u64 primitive_root_2n(u64 p, u64 two_n)
{
    const Modulus m(p);
    const u64 cofactor = (p - 1) / two_n;
    for (u64 g = 2; g < p; ++g) {
        const u64 r = m.pow(g, cofactor);
        if (m.pow(r, two_n / 2) == p - 1) return r;
    }
    throw CryptoError("no primitive root");
}

}  // namespace hear::ckks
