#pragma once

#include <cstdint>

namespace fpdsim {

/// splitmix64 finalizer, used to decorrelate structured seed inputs.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Per-device seed from a master seed, a device tag and a coordinate pair.
/// The mix depends only on (master, tag, a, b), never on the panel
/// dimensions, so growing the array does not reshuffle the mismatch of
/// devices that already existed.
inline std::uint64_t coord_seed(std::uint64_t master, std::uint32_t tag,
                                std::uint32_t a, std::uint32_t b) {
    const std::uint64_t packed =
        (std::uint64_t(tag) << 48) ^ (std::uint64_t(a) << 24) ^ std::uint64_t(b);
    return mix64(master ^ mix64(packed));
}

}  // namespace fpdsim
