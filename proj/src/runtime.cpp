#include "gldb/runtime.hpp"

#include <cblas.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <string>
#include <thread>

namespace gldb::runtime {
namespace {

bool is_fallback_core(std::string name) {
  std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::tolower(c); });
  return name == "prescott" || name == "core2" || name == "nehalem" || name == "katmai" || name == "coppermine" ||
         name == "northwood" || name == "banias" || name == "atom";
}

const char* preferred_core() {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_cpu_init();
  if (__builtin_cpu_supports("avx512f") && __builtin_cpu_supports("avx512bw") && __builtin_cpu_supports("avx512vl")) {
    return "SkylakeX";
  }
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) return "Haswell";
#endif
  return nullptr;
}

}  // namespace

const char* blas_core_name() { return openblas_get_corename(); }

void select_blas_kernels(int /*argc*/, char** argv) {
  if (std::getenv("OPENBLAS_CORETYPE") || std::getenv("GLDB_KEEP_BLAS_CORE")) return;
  if (!is_fallback_core(blas_core_name())) return;
  const char* core = preferred_core();
  if (!core) return;
  ::setenv("OPENBLAS_CORETYPE", core, 1);
  ::execv("/proc/self/exe", argv);
  // exec failed: carry on with the kernels we have.
  ::unsetenv("OPENBLAS_CORETYPE");
}

std::size_t worker_threads() {
  if (const char* env = std::getenv("GLDB_THREADS")) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && n >= 1) return static_cast<std::size_t>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void single_threaded_blas() { openblas_set_num_threads(1); }

}  // namespace gldb::runtime
