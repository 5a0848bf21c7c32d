#pragma once

#include <iosfwd>
#include <memory>
#include <string>

#include "hear/ckks/engine.hpp"

namespace hear::ckks {

// Binary containers: 8-byte magic, u32 version, u64 parameter digest, then
// little-endian payload. Loading checks magic, version and digest.
constexpr std::uint32_t kFormatVersion = 1;

void save_secret_key(const std::string& path, const SecretKey& sk, const ParameterSet& ps);
void save_public_key(const std::string& path, const PublicKey& pk, const ParameterSet& ps);
void save_eval_keys(const std::string& path, const EvalKeys& ek, const ParameterSet& ps);
void save_ciphertext(const std::string& path, const Ciphertext& ct, const ParameterSet& ps);

SecretKey load_secret_key(const std::string& path, const ParameterSet& ps);
PublicKey load_public_key(const std::string& path, const ParameterSet& ps);
EvalKeys load_eval_keys(const std::string& path, const ParameterSet& ps);
Ciphertext load_ciphertext(const std::string& path, const ParameterSet& ps);

// Streaming container of encoded plaintexts (level, scale, limbs), closed by
// a level -1 sentinel.
class PlaintextWriter {
public:
    PlaintextWriter(const std::string& path, const ParameterSet& ps);
    ~PlaintextWriter();
    void write(const Plaintext& pt);
    void close();
    std::size_t count() const { return count_; }

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    std::string path_;
    std::size_t count_ = 0;
};

std::vector<Plaintext> load_plaintexts(const std::string& path, const ParameterSet& ps);

void save_params(const std::string& path, const ParameterSet& ps);
ParameterSet load_params(const std::string& path);

}  // namespace hear::ckks
