#ifndef MRXI_RANDOM_HPP
#define MRXI_RANDOM_HPP

#include <cstdint>
#include <random>
#include <string_view>

namespace mrxi {

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

/// Independent generator for the labeled substream `label`/`index` of a run seed,
/// so that e.g. the noise of activation k does not depend on how many initial
/// angles were drawn before it.
inline std::mt19937_64 substream(std::uint64_t seed, std::string_view label, std::uint64_t index = 0) {
  const std::uint64_t tag = fnv1a(label);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(tag >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace mrxi

#endif  // MRXI_RANDOM_HPP
