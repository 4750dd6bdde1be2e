// Serial reference paths against the OpenMP kernels.
#include <benchmark/benchmark.h>

#include <map>

#include "vasotrans/fem.hpp"
#include "vasotrans/mesh.hpp"

using namespace vasotrans;

namespace {

const TetMesh& box(int n) {
  static std::map<int, TetMesh> cache;
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, build_box_mesh({0, 0, 0}, {1, 1, 1}, n, n, n)).first;
  return it->second;
}

Execution mode(const benchmark::State& s) { return s.range(1) ? Execution::Parallel : Execution::Serial; }

void BM_Stiffness(benchmark::State& state) {
  const TetMesh& m = box(static_cast<int>(state.range(0)));
  const TensorField D(1.0);
  for (auto _ : state) benchmark::DoNotOptimize(assemble_stiffness(m, {}, D, 0.0, mode(state)));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(m.cells.size()));
}

void BM_Convection(benchmark::State& state) {
  const TetMesh& m = box(static_cast<int>(state.range(0)));
  const VectorField u = VectorField::constant({0.0, 0.0, 1.0});
  for (auto _ : state) benchmark::DoNotOptimize(assemble_convection(m, {}, u, 0.0, mode(state)));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(m.cells.size()));
}

void BM_Spmv(benchmark::State& state) {
  const TetMesh& m = box(static_cast<int>(state.range(0)));
  const SparseMatrix A = assemble_stiffness(m, {}, TensorField(1.0), 0.0);
  const Vector x(A.cols(), 1.0);
  Vector y(A.rows());
  for (auto _ : state) {
    A.multiply(x, y, mode(state));
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(A.nnz()));
}

}  // namespace

// second argument: 0 serial, 1 OpenMP
BENCHMARK(BM_Stiffness)->ArgsProduct({{8, 16, 24}, {0, 1}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Convection)->ArgsProduct({{8, 16, 24}, {0, 1}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Spmv)->ArgsProduct({{16, 32}, {0, 1}})->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
