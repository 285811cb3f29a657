#include "log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace aste::log {

namespace {
std::atomic<Level> g_level{Level::kInfo};
std::mutex g_mu;
constexpr const char* kTags[] = {"D", "I", "W", "E"};
}  // namespace

void set_level(Level level) { g_level = level; }
Level level() { return g_level; }

void write(Level lv, const std::string& message) {
  if (lv < g_level.load() || lv == Level::kOff) return;
  std::lock_guard<std::mutex> lock(g_mu);
  std::cerr << "[" << kTags[static_cast<int>(lv)] << "] " << message << '\n';
}

}  // namespace aste::log
