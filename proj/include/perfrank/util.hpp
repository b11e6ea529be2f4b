#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

namespace perfrank {

using json = nlohmann::json;

// Random numbers. std::mt19937_64 output is fixed by the standard, but the
// standard distributions are not; everything seeded in this library draws
// through the helpers below so results are identical across toolchains.
using Engine = std::mt19937_64;

/// Uniform integer in [0, bound) by rejection sampling. bound must be > 0.
std::uint64_t uniform_below(Engine& engine, std::uint64_t bound);

/// Uniform double in [0, 1) with 53 random bits.
double uniform_unit(Engine& engine);

template <typename T>
void shuffle(std::vector<T>& items, Engine& engine) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_below(engine, i));
    std::swap(items[i - 1], items[j]);
  }
}

/// First `count` entries of a seeded Fisher-Yates permutation of [0, n).
std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t count,
                                                    Engine& engine);

/// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Stable 64-bit hash of a string (FNV-1a folded through mix64).
std::uint64_t hash64(std::string_view text, std::uint64_t seed = 0) noexcept;

/// Derives an independent seed for a named sub-stream.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream) noexcept;

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

/// Shortest round-trip decimal form of a double.
std::string format_double(double value);
double parse_double(std::string_view text);

// Line-delimited JSON.
void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(std::size_t line_no, const json& record)>& fn);
void write_jsonl(const std::filesystem::path& path, std::span<const json> records);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);

/// Serializes JSON with sorted keys and the library's number formatting.
std::string dump_json(const json& value, int indent = -1);

}  // namespace perfrank
