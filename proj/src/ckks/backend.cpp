#include "hear/ckks/backend.hpp"

namespace hear::ckks {

CkksBackend::CkksBackend(std::shared_ptr<const Context> ctx, std::shared_ptr<const EvalKeys> keys,
                         std::optional<SecretKey> sk, std::optional<PublicKey> pk, std::uint64_t seed)
    : ctx_(std::move(ctx)), keys_(std::move(keys)), enc_(*ctx_), eval_(*ctx_, keys_), sk_(std::move(sk)), seed_(seed)
{
    if (sk_) dec_.emplace(*ctx_, *sk_);
    if (pk) encryptor_ = std::make_unique<Encryptor>(*ctx_, std::move(*pk), seed ^ 0x9e3779b97f4a7c15ULL);
}

EvalKeys make_eval_keys(const Context& ctx, KeyGenerator& kg, const SecretKey& sk, const std::map<int, int>& rotations)
{
    EvalKeys keys;
    keys.relin = kg.relin_key(sk);
    for (const auto& [amount, level] : rotations) {
        const int r = normalize_rotation(amount, ctx.slots());
        if (r == 0) continue;
        auto it = keys.galois.find(r);
        if (it != keys.galois.end() && it->second.max_level >= level) continue;
        keys.galois[r] = kg.galois_key(sk, r, level);
    }
    return keys;
}

std::vector<int> missing_rotations(const Context& ctx, const EvalKeys& keys, const std::map<int, int>& rotations)
{
    std::vector<int> out;
    for (const auto& [amount, level] : rotations) {
        const int r = normalize_rotation(amount, ctx.slots());
        if (r == 0) continue;
        auto it = keys.galois.find(r);
        if (it == keys.galois.end() || it->second.max_level < level) out.push_back(r);
    }
    return out;
}

CkksBackend CkksBackend::generate(std::shared_ptr<const Context> ctx, const std::map<int, int>& rotations,
                                  std::uint64_t seed)
{
    KeyGenerator kg(*ctx, seed);
    SecretKey sk = kg.secret_key();
    PublicKey pk = kg.public_key(sk);
    auto keys = std::make_shared<EvalKeys>(make_eval_keys(*ctx, kg, sk, rotations));
    return CkksBackend(std::move(ctx), std::move(keys), std::move(sk), std::move(pk), seed + 1);
}

CkksBackend::Ciphertext CkksBackend::encrypt(const SlotVector& v, int level, double scale)
{
    Plaintext pt = enc_.encode(v, level, scale);
    if (encryptor_) return encryptor_->encrypt(pt);
    if (sk_) return encrypt_symmetric(*ctx_, *sk_, pt, seed_++);
    throw CryptoError("no encryption key available");
}

SlotVector CkksBackend::decrypt(const Ciphertext& c) const
{
    if (!dec_) throw CryptoError("secret key required for decryption");
    return enc_.decode(dec_->decrypt_coeffs(c), c.scale());
}

Plaintext CkksBackend::encode_for(const Ciphertext& a, const PlainVector& p) const
{
    if (a.empty()) throw CryptoError("empty ciphertext");
    if (p.level < a.level()) throw CryptoError("plaintext level below ciphertext level");
    if (p.slots != slots()) throw ValidationError("plaintext has wrong slot count");
    return enc_.encode(p.dense(), a.level(), p.scale);
}

CkksBackend::Ciphertext CkksBackend::add(const Ciphertext& a, const Ciphertext& b)
{
    Ciphertext out = a;
    add_inplace(out, b);
    return out;
}

void CkksBackend::add_inplace(Ciphertext& acc, const Ciphertext& b)
{
    require_same_level(acc.level(), b.level(), "add");
    require_scale(acc.scale(), b.scale(), "add");
    eval_.add_inplace(acc, b);
    counters_.bump(&OpCounts::add);
}

CkksBackend::Ciphertext CkksBackend::add_plain(const Ciphertext& a, const PlainVector& p)
{
    require_scale(a.scale(), p.scale, "add_plain");
    Plaintext pt = encode_for(a, p);
    pt.scale = a.scale();
    counters_.bump(&OpCounts::add);
    return eval_.add_plain(a, pt);
}

CkksBackend::Ciphertext CkksBackend::mult(const Ciphertext& a, const Ciphertext& b)
{
    require_same_level(a.level(), b.level(), "mult");
    counters_.bump(&OpCounts::mult);
    return eval_.mult(a, b);
}

CkksBackend::Ciphertext CkksBackend::mult_plain(const Ciphertext& a, const PlainVector& p)
{
    Ciphertext acc;
    mult_plain_acc(acc, a, p);
    return acc;
}

void CkksBackend::mult_plain_acc(Ciphertext& acc, const Ciphertext& a, const PlainVector& p)
{
    const Plaintext pt = encode_for(a, p);
    if (!acc.empty()) {
        require_same_level(acc.level(), a.level(), "mult_plain");
        require_scale(acc.scale(), a.scale() * p.scale, "mult_plain");
        counters_.bump(&OpCounts::add);
    }
    eval_.mult_plain_acc(acc, a, pt);
    counters_.bump(&OpCounts::mult_plain);
}

CkksBackend::Ciphertext CkksBackend::rot(const Ciphertext& a, int k)
{
    if (normalize_rotation(k, slots()) == 0) return a;
    counters_.bump(&OpCounts::rot);
    return eval_.rotate(a, k);
}

std::vector<CkksBackend::Ciphertext> CkksBackend::rot_many(const Ciphertext& a, std::span<const int> ks)
{
    std::uint64_t moved = 0;
    for (int k : ks) moved += normalize_rotation(k, slots()) != 0;
    auto out = eval_.rotate_hoisted(a, ks);
    counters_.hoisted(moved);
    return out;
}

CkksBackend::Ciphertext CkksBackend::rescale(const Ciphertext& a)
{
    counters_.bump(&OpCounts::rescale);
    return eval_.rescale(a);
}

CkksBackend::Ciphertext CkksBackend::mod_down(const Ciphertext& a, int level) { return eval_.mod_down(a, level); }

}  // namespace hear::ckks
