#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "hear/ckks/modarith.hpp"

namespace hear::ckks {

struct ParameterSet {
    std::string profile;
    int log_n = 0;
    std::vector<u64> primes;  // q_0 .. q_L
    u64 special = 0;
    double delta_msg = 0.0;
    double delta_mask = 0.0;
    double sigma = 3.2;
    std::vector<int> mask_levels;
    bool insecure = false;

    int n() const { return 1 << log_n; }
    int slots() const { return n() / 2; }
    int max_level() const { return static_cast<int>(primes.size()) - 1; }
    double log2_q() const;
    std::uint64_t digest() const;
    nlohmann::json to_json() const;
    static ParameterSet from_json(const nlohmann::json& j);
    std::vector<double> prime_values() const;
};

// Profiles: "hear" (N=2^14, L=10), "fast-hear" (N=2^14, L=12), and the
// insecure test profiles "toy" (N=2^12, fast-hear chain shape) and
// "toy-hear" (N=2^12, hear chain shape).
ParameterSet gen_params(const std::string& profile);

// Chain with q_0 of q0_bits, then one prime per entry of level_bits, and a
// special prime of special_bits.
ParameterSet custom_params(const std::string& name, int log_n, int q0_bits, const std::vector<int>& level_bits,
                           int special_bits, double delta_msg, double delta_mask, bool insecure);

// Negacyclic NTT modulo one prime. Output is in bit-reversed order: entry i
// holds the evaluation at psi^(2*brv(i)+1).
class NttTables {
public:
    NttTables(u64 p, int log_n);

    void forward(u64* a) const;
    void inverse(u64* a) const;
    const Modulus& mod() const { return mod_; }
    u64 psi() const { return psi_; }
    int log_n() const { return log_n_; }

private:
    Modulus mod_;
    int log_n_;
    int n_;
    u64 psi_;
    std::vector<u64> w_, ws_, iw_, iws_;
    u64 n_inv_, n_inv_s_;
};

std::uint32_t bit_reverse(std::uint32_t x, int bits);

// Immutable per-parameter-set tables shared by all engine components.
class Context {
public:
    explicit Context(ParameterSet params);

    const ParameterSet& params() const { return params_; }
    int n() const { return params_.n(); }
    int slots() const { return params_.slots(); }
    int max_level() const { return params_.max_level(); }

    // Index 0..L are the chain primes, L+1 is the special prime.
    const NttTables& ntt(int i) const { return ntt_[i]; }
    const Modulus& mod(int i) const { return ntt_[i].mod(); }
    int special_index() const { return max_level() + 1; }

    u64 p_mod_q(int i) const { return p_mod_q_[i]; }
    u64 p_inv_mod_q(int i) const { return p_inv_mod_q_[i]; }
    // q_l^{-1} mod q_j for rescaling from level l.
    u64 q_inv(int l, int j) const { return q_inv_[l][j]; }

    // Galois element 5^k mod 2N for a left rotation by k slots.
    u64 galois_element(int k) const;
    // NTT-domain permutation for X -> X^g: out[i] = in[perm[i]].
    std::vector<std::uint32_t> galois_permutation(u64 g) const;

    const std::vector<u64>& rot_group() const { return rot_group_; }
    const std::vector<std::complex<double>>& ksi() const { return ksi_; }

private:
    ParameterSet params_;
    std::vector<NttTables> ntt_;
    std::vector<u64> p_mod_q_, p_inv_mod_q_;
    std::vector<std::vector<u64>> q_inv_;
    std::vector<u64> rot_group_;
    std::vector<std::complex<double>> ksi_;
};

}  // namespace hear::ckks
