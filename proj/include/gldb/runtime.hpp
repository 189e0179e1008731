#pragma once

#include <cstddef>

namespace gldb::runtime {

/// OpenBLAS picks its kernels once, when the library loads. On virtual CPUs
/// that report a generic model name it falls back to SSE3 kernels even when
/// AVX2 or AVX-512 are present. When that happened and OPENBLAS_CORETYPE is
/// unset, this re-executes the current process with a matching core type.
/// Returns normally when no re-exec is needed or possible. Set
/// GLDB_KEEP_BLAS_CORE=1 to opt out.
void select_blas_kernels(int argc, char** argv);

/// Name of the kernel set OpenBLAS is using.
const char* blas_core_name();

/// Worker cap from GLDB_THREADS (default: hardware concurrency, at least 1).
std::size_t worker_threads();

/// Keep BLAS calls single-threaded; parallelism comes from batch workers.
void single_threaded_blas();

}  // namespace gldb::runtime
