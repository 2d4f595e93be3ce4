#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace iclpara {

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
bool starts_with(std::string_view s, std::string_view prefix);

// Lowercase hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

// 64-bit FNV-1a; used where a cheap stable hash suffices (seed mixing, hashing tricks).
std::uint64_t fnv1a64(std::string_view data);

// SplitMix64 finalizer, used to combine seeds.
std::uint64_t mix64(std::uint64_t x);

// Uniform integer in [0, bound) from a raw 64-bit engine. Unlike
// std::uniform_int_distribution the result is identical on every standard library.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound);

// First `k` entries of a seeded Fisher-Yates shuffle of [0, n).
std::vector<std::size_t> draw_without_replacement(std::size_t n, std::size_t k,
                                                  std::uint64_t seed);

// Fixed-precision decimal formatting ("%.*f"), and shortest "%.*g".
std::string format_fixed(double v, int decimals);
std::string format_general(double v, int significant);
// Shortest text that parses back to the same double.
std::string format_shortest(double v);

std::string read_file(const std::filesystem::path& path);
// Writes via a temporary sibling and rename so readers never see half a file.
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace iclpara
