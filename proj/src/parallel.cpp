#include "vasotrans/parallel.hpp"

#include <omp.h>

#include <algorithm>
#include <cstdlib>
#include <string>

namespace vasotrans {

namespace {
int g_override = 0;
}

int thread_count() {
  if (g_override > 0) return g_override;
  if (const char* env = std::getenv("VASOTRANS_THREADS")) {
    try {
      return std::max(1, std::stoi(env));
    } catch (...) {
      return 1;
    }
  }
  return std::max(1, omp_get_max_threads());
}

void set_thread_count(int n) { g_override = std::max(0, n); }

std::vector<std::pair<std::size_t, std::size_t>> chunk_ranges(std::size_t n, int parts) {
  parts = std::max(1, parts);
  std::vector<std::pair<std::size_t, std::size_t>> out;
  out.reserve(parts);
  for (int p = 0; p < parts; ++p) {
    out.emplace_back(n * p / parts, n * (p + 1) / parts);
  }
  return out;
}

}  // namespace vasotrans
