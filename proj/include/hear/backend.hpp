#pragma once

#include <atomic>
#include <concepts>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "hear/common.hpp"
#include "hear/layout.hpp"

namespace hear {

// A block of equal plaintext values: slots start + q*row_step + n*step for
// q < rows, n < count. Runs never wrap past the last slot.
struct Run {
    std::uint32_t start = 0;
    std::uint32_t count = 0;
    std::uint32_t step = 1;
    std::uint32_t rows = 1;
    std::uint32_t row_step = 0;
    double value = 0.0;

    std::uint32_t row(std::uint32_t q) const { return start + q * row_step; }
};

// Plaintext slot vector held as runs (all weight, mask and coefficient
// vectors in the pipeline are piecewise constant), plus its encoding level
// and scale. Slots not covered by a run are zero.
struct PlainVector {
    int slots = 0;
    int level = 0;
    double scale = 1.0;
    std::vector<Run> runs;

    static PlainVector from_dense(const SlotVector& v, int level, double scale);
    SlotVector dense() const;
    std::size_t nonzeros() const;
    // rho^k: result[x] = this[x + k].
    PlainVector rotated(int k) const;
    void add_run(std::uint32_t start, std::uint32_t count, std::uint32_t step, double value);
    void add_block(std::uint32_t start, std::uint32_t count, std::uint32_t step, std::uint32_t rows,
                   std::uint32_t row_step, double value);
};

int normalize_rotation(long k, int slots);

struct OpCounts {
    std::uint64_t rot = 0;
    std::uint64_t hoisted_groups = 0;
    std::uint64_t hoisted_total = 0;
    std::uint64_t mult = 0;
    std::uint64_t mult_plain = 0;
    std::uint64_t rescale = 0;
    std::uint64_t add = 0;

    // Single and hoisted rotations together.
    std::uint64_t rotations() const { return rot + hoisted_total; }
    OpCounts& operator+=(const OpCounts& o);
    bool operator==(const OpCounts&) const = default;
    nlohmann::json to_json() const;
};

// Per-layer tallies. The active label is chosen by the caller through
// OpCounters::Scope; updates are serialized so workers can share one instance.
class OpCounters {
public:
    class Scope {
    public:
        Scope(OpCounters& c, std::string label) : c_(c), prev_(c.label()) { c_.set_label(std::move(label)); }
        ~Scope() { c_.set_label(prev_); }
        Scope(const Scope&) = delete;
        Scope& operator=(const Scope&) = delete;

    private:
        OpCounters& c_;
        std::string prev_;
    };

    void bump(std::uint64_t OpCounts::*field, std::uint64_t n = 1);
    void hoisted(std::uint64_t n);
    void set_label(std::string label);
    std::string label() const;

    OpCounts total() const;
    OpCounts layer(const std::string& name) const;
    // Sum over labels equal to `prefix` or starting with `prefix/`.
    OpCounts prefix(const std::string& prefix) const;
    std::map<std::string, OpCounts> layers() const;
    nlohmann::json to_json() const;
    void clear();

private:
    mutable std::mutex mu_;
    std::string label_ = "unlabeled";
    std::map<std::string, OpCounts> layers_;
};

// Slot-semantics contract shared by the simulator and the CKKS engine.
template <class B>
concept SlotBackend = requires(B& b, const B& cb, const typename B::Ciphertext& c, typename B::Ciphertext& acc,
                               const PlainVector& p, const SlotVector& v, std::span<const int> ks, int lvl) {
    typename B::Ciphertext;
    { cb.slots() } -> std::convertible_to<int>;
    { cb.max_level() } -> std::convertible_to<int>;
    { cb.prime(lvl) } -> std::convertible_to<double>;
    { b.encrypt(v, lvl, 1.0) } -> std::same_as<typename B::Ciphertext>;
    { b.decrypt(c) } -> std::same_as<SlotVector>;
    { b.add(c, c) } -> std::same_as<typename B::Ciphertext>;
    b.add_inplace(acc, c);
    { b.add_plain(c, p) } -> std::same_as<typename B::Ciphertext>;
    { b.mult(c, c) } -> std::same_as<typename B::Ciphertext>;
    { b.mult_plain(c, p) } -> std::same_as<typename B::Ciphertext>;
    b.mult_plain_acc(acc, c, p);
    { b.rot(c, 1) } -> std::same_as<typename B::Ciphertext>;
    { b.rot_many(c, ks) } -> std::same_as<std::vector<typename B::Ciphertext>>;
    { b.rescale(c) } -> std::same_as<typename B::Ciphertext>;
    { b.mod_down(c, lvl) } -> std::same_as<typename B::Ciphertext>;
    { b.counters() } -> std::same_as<OpCounters&>;
    { c.level() } -> std::convertible_to<int>;
    { c.scale() } -> std::convertible_to<double>;
    { c.empty() } -> std::convertible_to<bool>;
};

bool scales_match(double a, double b);
void require_same_level(int a, int b, const char* op);
void require_scale(double have, double want, const char* op);

// Runs body(i) for i in [0, n) on up to `threads` workers (0 = hardware).
void parallel_for(int n, int threads, const std::function<void(int)>& body);
int default_threads();

}  // namespace hear
