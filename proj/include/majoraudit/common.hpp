#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace majoraudit {

// Error taxonomy shared by all modules. Fatal conditions throw; recoverable
// per-row / per-sample issues are collected into report structs instead.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    using Error::Error;
};

class TransportError : public Error {
public:
    using Error::Error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

// ---- hashing ---------------------------------------------------------------

std::uint64_t fnv1a64(std::string_view bytes);

// splitmix64 finisher; used to derive independent per-cell / per-prompt seeds.
std::uint64_t mix64(std::uint64_t a, std::uint64_t b);

std::string hash_hex(std::uint64_t h);

// FNV-1a of a whole file, as 16 hex chars. Throws IoError if unreadable.
std::string file_hash_hex(const std::string& path);

// ---- deterministic randomness ----------------------------------------------

// Thin xoshiro-free PRNG wrapper: we only need a stable stream that does not
// depend on libstdc++ distribution internals, so cache fixtures and synthetic
// responses stay byte-identical across toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ULL) {}

    std::uint64_t next();
    // uniform in [0,1)
    double next_double();
    // uniform integer in [lo, hi] inclusive
    std::int64_t next_int(std::int64_t lo, std::int64_t hi);
    // uniform index in [0, n)
    std::size_t next_index(std::size_t n);
    bool next_bernoulli(double p);

private:
    std::uint64_t state_;
};

// ---- strings ----------------------------------------------------------------

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
// case-fold, trim, collapse internal whitespace runs to one space, strip
// trailing punctuation; the shared normalization for major names and lexicons.
std::string normalize_name(std::string_view s);
std::vector<std::string> split(std::string_view s, char delim);
bool starts_with(std::string_view s, std::string_view prefix);

std::size_t levenshtein(std::string_view a, std::string_view b);

// ---- time --------------------------------------------------------------------

// ISO-8601 UTC, second resolution ("2024-05-01T12:00:00Z").
std::string utc_now_iso8601();

}  // namespace majoraudit
