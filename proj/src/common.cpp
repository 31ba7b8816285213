#include "statetrack/common.hpp"

#include <cstdlib>
#include <thread>

namespace statetrack {

int max_threads() {
    static const int cached = [] {
        int hw = static_cast<int>(std::thread::hardware_concurrency());
        if (hw < 1) hw = 1;
        if (const char* env = std::getenv("STATETRACK_THREADS")) {
            char* end = nullptr;
            const long v = std::strtol(env, &end, 10);
            if (end != env && *end == '\0' && v >= 1 && v <= hw) return static_cast<int>(v);
        }
        return hw;
    }();
    return cached;
}

}  // namespace statetrack
