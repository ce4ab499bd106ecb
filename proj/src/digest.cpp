#include "kmlp/digest.hpp"

#include <cstdio>
#include <utility>

namespace kmlp {

std::string hex_digest(std::string_view bytes) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(bytes)));
  return buf;
}

void seeded_shuffle(std::span<std::size_t> items, std::uint64_t seed) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(unit_interval(mix64(seed, i)) * static_cast<double>(i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace kmlp
