#include "pathnet/error.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace pathnet {
namespace {
std::atomic<bool> g_warnings{true};
std::mutex g_warn_mutex;
}  // namespace

void warn(const std::string& message) {
  if (!g_warnings.load()) return;
  std::lock_guard<std::mutex> lock(g_warn_mutex);
  std::cerr << "warning: " << message << '\n';
}

void set_warnings_enabled(bool enabled) { g_warnings.store(enabled); }

}  // namespace pathnet
