// Reference loops vs the parallel GEMM kernels on discriminator-sized convs.
#include <random>
#include <vector>

#include <benchmark/benchmark.h>
#include <omp.h>

#include "mreal/kernels.hpp"
#include "mreal/kernels_reference.hpp"

namespace k = mreal::kernels;

namespace {

struct Shapes {
  int batch, ch, len, kw;
};

// args: channels, length. Batch 16, kernel 15, square convs.
Shapes shapes(const benchmark::State& st) {
  return {16, static_cast<int>(st.range(0)), static_cast<int>(st.range(1)), 15};
}

std::vector<float> filled(std::size_t n, unsigned seed) {
  std::mt19937 gen(seed);
  std::normal_distribution<float> d(0.0f, 1.0f);
  std::vector<float> v(n);
  for (auto& x : v) x = d(gen);
  return v;
}

struct Buffers {
  std::vector<float> x, w, b, y;
  explicit Buffers(const Shapes& s)
      : x(filled(std::size_t(s.batch) * s.ch * s.len, 1)),
        w(filled(std::size_t(s.ch) * s.ch * s.kw, 2)),
        b(filled(s.ch, 3)),
        y(std::size_t(s.batch) * s.ch * s.len) {}
};

void set_counters(benchmark::State& st, const Shapes& s) {
  const double flops = 2.0 * s.batch * s.ch * s.ch * s.kw * double(s.len);
  st.counters["GFLOP/s"] = benchmark::Counter(flops * st.iterations() * 1e-9, benchmark::Counter::kIsRate);
  st.counters["threads"] = omp_get_max_threads();
}

void BM_forward_reference(benchmark::State& st) {
  const auto s = shapes(st);
  Buffers buf(s);
  for (auto _ : st) {
    k::reference::conv1d_forward(buf.x.data(), s.batch, s.ch, s.len, buf.w.data(), buf.b.data(), s.ch, s.kw, buf.y.data());
    benchmark::DoNotOptimize(buf.y.data());
  }
  set_counters(st, s);
}

void BM_forward_parallel(benchmark::State& st) {
  const auto s = shapes(st);
  Buffers buf(s);
  for (auto _ : st) {
    k::conv1d_forward(buf.x.data(), s.batch, s.ch, s.len, buf.w.data(), buf.b.data(), s.ch, s.kw, buf.y.data());
    benchmark::DoNotOptimize(buf.y.data());
  }
  set_counters(st, s);
}

void BM_backward_input_reference(benchmark::State& st) {
  const auto s = shapes(st);
  Buffers buf(s);
  for (auto _ : st) {
    k::reference::conv1d_backward_input(buf.x.data(), s.batch, s.ch, s.len, buf.w.data(), s.ch, s.kw, buf.y.data());
    benchmark::DoNotOptimize(buf.y.data());
  }
  set_counters(st, s);
}

void BM_backward_input_parallel(benchmark::State& st) {
  const auto s = shapes(st);
  Buffers buf(s);
  for (auto _ : st) {
    k::conv1d_backward_input(buf.x.data(), s.batch, s.ch, s.len, buf.w.data(), s.ch, s.kw, buf.y.data());
    benchmark::DoNotOptimize(buf.y.data());
  }
  set_counters(st, s);
}

void BM_backward_weight_reference(benchmark::State& st) {
  const auto s = shapes(st);
  Buffers buf(s);
  std::vector<float> dw(buf.w.size()), db(s.ch);
  for (auto _ : st) {
    k::reference::conv1d_backward_weight(buf.x.data(), buf.x.data(), s.batch, s.ch, s.len, s.ch, s.kw, dw.data(), db.data());
    benchmark::DoNotOptimize(dw.data());
  }
  set_counters(st, s);
}

void BM_backward_weight_parallel(benchmark::State& st) {
  const auto s = shapes(st);
  Buffers buf(s);
  std::vector<float> dw(buf.w.size()), db(s.ch);
  for (auto _ : st) {
    k::conv1d_backward_weight(buf.x.data(), buf.x.data(), s.batch, s.ch, s.len, s.ch, s.kw, dw.data(), db.data());
    benchmark::DoNotOptimize(dw.data());
  }
  set_counters(st, s);
}

// Channels x length of the four discriminator blocks at width 64.
void desk_shapes(benchmark::internal::Benchmark* b) {
  b->Args({64, 720})->Args({64, 360})->Args({64, 180})->Args({64, 90})->Unit(benchmark::kMillisecond);
}

}  // namespace

BENCHMARK(BM_forward_reference)->Apply(desk_shapes);
BENCHMARK(BM_forward_parallel)->Apply(desk_shapes);
BENCHMARK(BM_backward_input_reference)->Apply(desk_shapes);
BENCHMARK(BM_backward_input_parallel)->Apply(desk_shapes);
BENCHMARK(BM_backward_weight_reference)->Apply(desk_shapes);
BENCHMARK(BM_backward_weight_parallel)->Apply(desk_shapes);

BENCHMARK_MAIN();
