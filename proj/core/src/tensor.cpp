#include "amt/tensor.hpp"

#include <atomic>

namespace amt::nn {

namespace {
std::atomic<bool> g_finite_checks{true};
}

bool finite_checks_enabled() { return g_finite_checks.load(std::memory_order_relaxed); }
void set_finite_checks(bool enabled) { g_finite_checks.store(enabled, std::memory_order_relaxed); }

}  // namespace amt::nn
