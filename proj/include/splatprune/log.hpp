#pragma once

#include <functional>
#include <iostream>
#include <mutex>
#include <string>
#include <utility>

namespace splatprune {

using WarningSink = std::function<void(const std::string&)>;

namespace detail {
inline WarningSink& warning_sink() {
  static WarningSink sink = [](const std::string& msg) { std::cerr << "warning: " << msg << '\n'; };
  return sink;
}
inline std::mutex& warning_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace detail

/// Replaces the process-wide warning sink; returns the previous one.
inline WarningSink set_warning_sink(WarningSink sink) {
  std::lock_guard lock(detail::warning_mutex());
  return std::exchange(detail::warning_sink(), std::move(sink));
}

inline void warn(const std::string& msg) {
  std::lock_guard lock(detail::warning_mutex());
  if (detail::warning_sink()) detail::warning_sink()(msg);
}

}  // namespace splatprune
