#pragma once

#include <cstddef>

namespace posefuse {

/// Selects the serial reference path or the OpenMP path of a kernel.
/// Both paths write into per-index slots and reduce in index order, so
/// their results are bit-identical.
enum class Exec { kSerial, kParallel };

template <typename Fn>
void for_each_index(Exec exec, std::ptrdiff_t n, Fn&& fn) {
  if (exec == Exec::kParallel) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) fn(i);
  } else {
    for (std::ptrdiff_t i = 0; i < n; ++i) fn(i);
  }
}

}  // namespace posefuse
