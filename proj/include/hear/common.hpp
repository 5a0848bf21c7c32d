#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace hear {

// Malformed input, shape or configuration. Maps to CLI exit code 2.
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Level, scale, key or modulus failure. Maps to CLI exit code 3.
struct CryptoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A pipeline step landed on a level/scale other than the one scheduled.
struct ScheduleError : CryptoError {
    using CryptoError::CryptoError;
};

enum class Dim { One, Two };

inline const char* to_string(Dim d) { return d == Dim::One ? "1d" : "2d"; }

// FNV-1a over raw bytes; used for parameter and model digests.
inline std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t h = 0xcbf29ce484222325ULL)
{
    auto p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace hear
