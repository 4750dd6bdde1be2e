#pragma once

#include <cstddef>
#include <utility>
#include <vector>

namespace vasotrans {

enum class Execution { Serial, Parallel };

/// Worker count: VASOTRANS_THREADS if set (clamped to >= 1), otherwise the
/// OpenMP default.
int thread_count();
void set_thread_count(int n);

/// Splits [0, n) into `parts` contiguous ranges of near-equal length.
std::vector<std::pair<std::size_t, std::size_t>> chunk_ranges(std::size_t n, int parts);

}  // namespace vasotrans
