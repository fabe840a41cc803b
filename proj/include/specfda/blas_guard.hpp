#pragma once

// Process-level guard for executables: if the loaded OpenBLAS fails
// blas_self_check, re-exec the program with OPENBLAS_CORETYPE forced to a
// fallback kernel set. The variable is read only when the library loads,
// so it cannot be changed in-process.

#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <string>

#include "specfda/numerics.hpp"

namespace specfda {

/// Returns true when the eigensolver is trustworthy. May not return (execv)
/// when a retry is possible.
inline bool ensure_reliable_blas(char** argv) {
  if (blas_self_check()) return true;
  static const char* const kFallbacks[] = {"SkylakeX", "Haswell", "Sandybridge"};
  constexpr int kCount = 3;
  const char* attempt_env = std::getenv("SPECFDA_BLAS_ATTEMPT");
  const int attempt = attempt_env ? std::atoi(attempt_env) : 0;
  if (attempt >= kCount) return false;
  setenv("OPENBLAS_CORETYPE", kFallbacks[attempt], 1);
  setenv("SPECFDA_BLAS_ATTEMPT", std::to_string(attempt + 1).c_str(), 1);
  std::fflush(nullptr);
  execv("/proc/self/exe", argv);
  return false;
}

}  // namespace specfda
