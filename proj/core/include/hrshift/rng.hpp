#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace hrshift {

using Rng = std::mt19937_64;

/// Stable 64-bit identifier for a named random substream.
std::uint64_t stream_id(std::string_view name) noexcept;

/// Derives an independent seed from a master seed and a path of stream ids
/// (e.g. {stream_id("mc"), subject, block}). Pure function of its inputs.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) noexcept;

inline Rng make_rng(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
  return Rng(derive_seed(master, path));
}

}  // namespace hrshift
