#pragma once

#include <filesystem>
#include <string>

namespace testutil {

// Fresh per-suite scratch directory under the ctest working directory.
inline std::string scratch_dir(const std::string& suite) {
  std::filesystem::path p = std::filesystem::path("scratch") / suite;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p.string();
}

inline double rel_err(double got, double want) {
  const double scale = std::max({std::abs(got), std::abs(want), 1e-8});
  return std::abs(got - want) / scale;
}

}  // namespace testutil
