#pragma once

#include <cstdint>
#include <vector>

namespace boltzgrad {

// Blocked deterministic reduction: partial sums over fixed-size blocks are
// combined in block order, so the result does not depend on the number of
// OpenMP threads. T needs a default zero value and operator+=.
template <typename T, typename TermFn>
T det_sum(std::int64_t n, TermFn&& term) {
  constexpr std::int64_t kBlock = 8192;
  if (n <= 0) return T{};
  const std::int64_t nblocks = (n + kBlock - 1) / kBlock;
  std::vector<T> partial(static_cast<std::size_t>(nblocks), T{});
#pragma omp parallel for schedule(static)
  for (std::int64_t b = 0; b < nblocks; ++b) {
    const std::int64_t lo = b * kBlock;
    const std::int64_t hi = lo + kBlock < n ? lo + kBlock : n;
    T acc{};
    for (std::int64_t i = lo; i < hi; ++i) acc += term(i);
    partial[static_cast<std::size_t>(b)] = acc;
  }
  T total{};
  for (const T& p : partial) total += p;
  return total;
}

// Sets the OpenMP thread count for subsequent parallel regions; no-op when
// built without OpenMP.
void set_thread_count(int n);
int max_thread_count();

}  // namespace boltzgrad
