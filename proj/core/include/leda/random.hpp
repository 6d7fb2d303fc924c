#pragma once

#include <cstdint>

namespace leda {

/// splitmix64 mix of (seed, stream, index). Gives every (stream, index) its
/// own generator seed, independent of the order things are generated in.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

}  // namespace leda
