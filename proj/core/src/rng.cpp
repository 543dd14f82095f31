#include "sqclock/rng.hpp"

namespace sqclock {

std::uint64_t mix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

Rng Rng::for_stream(std::uint64_t seed, std::uint64_t index, std::uint64_t tag)
{
    return Rng(mix64(mix64(mix64(seed) ^ index) ^ (tag * 0xd1b54a32d192ed03ULL)));
}

double Rng::uniform(double lo, double hi)
{
    // 53 random mantissa bits, independent of the library's distribution code.
    const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
}

}  // namespace sqclock
