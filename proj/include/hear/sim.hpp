#pragma once

#include <memory>
#include <span>
#include <vector>

#include "hear/backend.hpp"

namespace hear {

// Exact slot simulator. Slot values live on a fixed-point grid of 2^-42 held
// in doubles with magnitude below 2^11, so every addition is exact and the
// result of a sum does not depend on evaluation order. Products are rounded
// to the grid. Levels and scales are pure bookkeeping that follows the
// configured prime chain.
class SimBackend {
public:
    static constexpr int kFracBits = 42;
    static constexpr double kLimit = 2048.0;

    class Ciphertext {
    public:
        int level() const { return level_; }
        double scale() const { return scale_; }
        bool empty() const { return !data_; }
        int slots() const { return data_ ? static_cast<int>(data_->size()) : 0; }

    private:
        friend class SimBackend;
        std::shared_ptr<std::vector<double>> data_;
        int offset_ = 0;
        int level_ = -1;
        double scale_ = 0.0;
    };

    // primes[l] is the prime dropped when rescaling from level l (primes[0] = q_0).
    SimBackend(int slots, std::vector<double> primes, int threads = 0);

    int slots() const { return slots_; }
    int max_level() const { return static_cast<int>(primes_.size()) - 1; }
    double prime(int level) const { return primes_.at(level); }
    int threads() const { return threads_; }
    OpCounters& counters() { return counters_; }

    static double quantize(double v);

    Ciphertext encrypt(const SlotVector& v, int level, double scale);
    SlotVector decrypt(const Ciphertext& c) const;

    Ciphertext add(const Ciphertext& a, const Ciphertext& b);
    void add_inplace(Ciphertext& acc, const Ciphertext& b);
    Ciphertext add_plain(const Ciphertext& a, const PlainVector& p);
    Ciphertext mult(const Ciphertext& a, const Ciphertext& b);
    Ciphertext mult_plain(const Ciphertext& a, const PlainVector& p);
    // acc += a * p; an empty acc is initialised with the product.
    void mult_plain_acc(Ciphertext& acc, const Ciphertext& a, const PlainVector& p);
    Ciphertext rot(const Ciphertext& a, int k);
    std::vector<Ciphertext> rot_many(const Ciphertext& a, std::span<const int> ks);
    Ciphertext rescale(const Ciphertext& a);
    Ciphertext mod_down(const Ciphertext& a, int level);

    // Replaces slot contents without touching counters or the ledger (fault injection in tests).
    Ciphertext with_values(const Ciphertext& c, const SlotVector& v) const;

private:
    std::vector<double> materialize(const Ciphertext& c) const;
    std::vector<double>& own(Ciphertext& c) const;
    void check_level(int level) const;

    int slots_;
    std::vector<double> primes_;
    int threads_;
    OpCounters counters_;
};

}  // namespace hear
