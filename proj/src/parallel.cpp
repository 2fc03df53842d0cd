#include "slender/parallel.hpp"

#include <charconv>
#include <cstdlib>
#include <cstring>

namespace slender {

unsigned resolve_threads(unsigned requested) noexcept {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("SLENDER_THREADS")) {
        unsigned value = 0;
        const auto [ptr, ec] = std::from_chars(env, env + std::strlen(env), value);
        if (ec == std::errc() && value > 0) return value;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? hw : 1;
}

}  // namespace slender
