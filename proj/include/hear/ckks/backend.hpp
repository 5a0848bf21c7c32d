#pragma once

#include <memory>
#include <optional>
#include <span>

#include "hear/backend.hpp"
#include "hear/ckks/engine.hpp"

namespace hear::ckks {

// Relinearization key plus Galois keys for `rotations` (amount -> highest
// level it is used at); amounts are normalized and zero is skipped.
EvalKeys make_eval_keys(const Context& ctx, KeyGenerator& kg, const SecretKey& sk, const std::map<int, int>& rotations);

// Amounts of `rotations` the keys do not cover at the required level.
std::vector<int> missing_rotations(const Context& ctx, const EvalKeys& keys, const std::map<int, int>& rotations);

// Slot-semantics adapter over the RNS-CKKS engine. Plain vectors are encoded
// on demand at the level of the ciphertext they meet.
class CkksBackend {
public:
    using Ciphertext = ckks::Ciphertext;

    CkksBackend(std::shared_ptr<const Context> ctx, std::shared_ptr<const EvalKeys> keys,
                std::optional<SecretKey> sk = std::nullopt, std::optional<PublicKey> pk = std::nullopt,
                std::uint64_t seed = 1);

    // Generates a fresh key set holding rotation keys for `rotations`
    // (amount -> highest level it is used at).
    static CkksBackend generate(std::shared_ptr<const Context> ctx, const std::map<int, int>& rotations,
                                std::uint64_t seed);

    int slots() const { return ctx_->slots(); }
    int max_level() const { return ctx_->max_level(); }
    double prime(int level) const { return static_cast<double>(ctx_->params().primes.at(level)); }
    OpCounters& counters() { return counters_; }
    const Context& context() const { return *ctx_; }
    const Evaluator& evaluator() const { return eval_; }
    const Encoder& encoder() const { return enc_; }

    Ciphertext encrypt(const SlotVector& v, int level, double scale);
    SlotVector decrypt(const Ciphertext& c) const;

    Ciphertext add(const Ciphertext& a, const Ciphertext& b);
    void add_inplace(Ciphertext& acc, const Ciphertext& b);
    Ciphertext add_plain(const Ciphertext& a, const PlainVector& p);
    Ciphertext mult(const Ciphertext& a, const Ciphertext& b);
    Ciphertext mult_plain(const Ciphertext& a, const PlainVector& p);
    void mult_plain_acc(Ciphertext& acc, const Ciphertext& a, const PlainVector& p);
    Ciphertext rot(const Ciphertext& a, int k);
    std::vector<Ciphertext> rot_many(const Ciphertext& a, std::span<const int> ks);
    Ciphertext rescale(const Ciphertext& a);
    Ciphertext mod_down(const Ciphertext& a, int level);

private:
    Plaintext encode_for(const Ciphertext& a, const PlainVector& p) const;

    std::shared_ptr<const Context> ctx_;
    std::shared_ptr<const EvalKeys> keys_;
    Encoder enc_;
    Evaluator eval_;
    std::optional<Decryptor> dec_;
    std::optional<SecretKey> sk_;
    std::unique_ptr<Encryptor> encryptor_;
    std::uint64_t seed_;
    OpCounters counters_;
};

static_assert(SlotBackend<CkksBackend>);

}  // namespace hear::ckks
