#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <span>
#include <vector>

#include "hear/ckks/context.hpp"

namespace hear::ckks {

// RNS polynomials are flat arrays of (limbs * N) residues in NTT form.
struct Plaintext {
    int level = -1;
    double scale = 0.0;
    std::vector<u64> data;
};

struct Ciphertext {
    int level_ = -1;
    double scale_ = 0.0;
    std::vector<u64> c0, c1;

    int level() const { return level_; }
    double scale() const { return scale_; }
    bool empty() const { return level_ < 0; }
};

// Secret over q_0..q_L and P.
struct SecretKey {
    std::vector<u64> s;
};

struct PublicKey {
    std::vector<u64> b, a;  // over q_0..q_L
};

// Key-switching key valid for ciphertexts at level <= max_level. Digit i
// holds (b_i, a_i) over q_0..q_max_level and P.
struct KswKey {
    int max_level = -1;
    std::vector<std::vector<u64>> b, a;
    std::size_t bytes() const;
};

struct EvalKeys {
    KswKey relin;
    std::map<int, KswKey> galois;  // keyed by left-rotation amount in [1, slots)
    std::size_t bytes() const;
};

class Encoder {
public:
    explicit Encoder(const Context& ctx) : ctx_(ctx) {}

    Plaintext encode(std::span<const double> slots, int level, double scale) const;
    // Real parts of the slots of a coefficient vector divided by `scale`.
    std::vector<double> decode(std::span<const double> coeffs, double scale) const;

    void fft_special(std::vector<std::complex<double>>& v) const;
    void fft_special_inv(std::vector<std::complex<double>>& v) const;

private:
    const Context& ctx_;
};

class KeyGenerator {
public:
    KeyGenerator(const Context& ctx, std::uint64_t seed);

    SecretKey secret_key();
    PublicKey public_key(const SecretKey& sk);
    KswKey relin_key(const SecretKey& sk);
    KswKey galois_key(const SecretKey& sk, int amount, int max_level);

private:
    KswKey switching_key(const SecretKey& sk, const std::vector<u64>& target, int max_level);
    void sample_uniform(u64* out, int limb);
    void sample_gaussian(std::vector<std::int64_t>& e);

    const Context& ctx_;
    std::mt19937_64 rng_;
};

// Helpers shared by key generation, encryption and decryption.
void ntt_limbs(const Context& ctx, std::vector<u64>& poly, int limbs, int special_at = -1);
std::vector<u64> lift_signed(const Context& ctx, const std::vector<std::int64_t>& v, int limbs, bool with_special);

class Encryptor {
public:
    Encryptor(const Context& ctx, PublicKey pk, std::uint64_t seed);
    Ciphertext encrypt(const Plaintext& pt);

private:
    const Context& ctx_;
    PublicKey pk_;
    std::mt19937_64 rng_;
    std::mutex mu_;
};

// Symmetric encryption; used when only the secret key is available.
Ciphertext encrypt_symmetric(const Context& ctx, const SecretKey& sk, const Plaintext& pt, std::uint64_t seed);

class Decryptor {
public:
    Decryptor(const Context& ctx, SecretKey sk);
    // Centered integer coefficients of c0 + c1*s as doubles.
    std::vector<double> decrypt_coeffs(const Ciphertext& ct) const;

private:
    const Context& ctx_;
    SecretKey sk_;
    std::vector<std::vector<u64>> prefix_mod_;  // prod_{k<j} q_k mod q_i
    std::vector<u64> prefix_inv_;               // (prod_{k<i} q_k)^{-1} mod q_i
};

// Hoisted decomposition of one ciphertext component.
struct Decomposition {
    int level = -1;
    std::vector<u64> data;  // [digit][target][N], targets q_0..q_level, P
};

class Evaluator {
public:
    Evaluator(const Context& ctx, std::shared_ptr<const EvalKeys> keys);

    Ciphertext add(const Ciphertext& a, const Ciphertext& b) const;
    void add_inplace(Ciphertext& a, const Ciphertext& b) const;
    Ciphertext add_plain(const Ciphertext& a, const Plaintext& p) const;
    Ciphertext mult(const Ciphertext& a, const Ciphertext& b) const;
    void mult_plain_acc(Ciphertext& acc, const Ciphertext& a, const Plaintext& p) const;
    Ciphertext rotate(const Ciphertext& a, int amount) const;
    std::vector<Ciphertext> rotate_hoisted(const Ciphertext& a, std::span<const int> amounts) const;
    Ciphertext rescale(const Ciphertext& a) const;
    Ciphertext mod_down(const Ciphertext& a, int level) const;

    Decomposition decompose(const std::vector<u64>& poly, int level) const;
    bool has_rotation(int amount, int level) const;
    const EvalKeys& keys() const { return *keys_; }

private:
    // (u0, u1) ~ P^{-1} * <D, key>, optionally permuting D's coefficients.
    void key_switch(const Decomposition& d, const KswKey& key, const std::uint32_t* perm, std::vector<u64>& u0,
                    std::vector<u64>& u1) const;
    void mod_down_p(std::vector<u64>& acc, int level) const;
    const KswKey& galois(int amount, int level) const;

    const Context& ctx_;
    std::shared_ptr<const EvalKeys> keys_;
    std::map<int, std::vector<std::uint32_t>> perms_;
};

}  // namespace hear::ckks
