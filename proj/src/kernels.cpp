#include "simvae/kernels.hpp"

#include <algorithm>
#include <cstring>
#include <vector>

#include "simvae/errors.hpp"

namespace simvae::kernels {

namespace {

typedef double v8d __attribute__((vector_size(64)));

constexpr std::size_t kMR = 8;   // rows per micro-tile
constexpr std::size_t kNR = 16;  // cols per micro-tile (two 8-wide vectors)
constexpr std::size_t kKC = 256; // depth of one packed panel

// Below this many multiply-adds the parallel region costs more than it saves.
constexpr std::size_t kParallelFlops = std::size_t{1} << 16;

struct Strided {
  const double* p;
  std::size_t row_stride;
  std::size_t col_stride;
  double operator()(std::size_t r, std::size_t c) const { return p[r * row_stride + c * col_stride]; }
};

inline v8d load8(const double* p) {
  v8d v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

void check_sizes(Layout layout, std::size_t m, std::size_t n, std::size_t k,
                 std::size_t a, std::size_t b, std::size_t c) {
  (void)layout;
  if (a < m * k || b < k * n || c < m * n)
    throw ShapeError("gemm: buffer sizes do not cover " + std::to_string(m) + "x" +
                     std::to_string(k) + " * " + std::to_string(k) + "x" + std::to_string(n));
}

Strided view_a(Layout layout, const double* a, std::size_t m, std::size_t k) {
  return layout == Layout::TN ? Strided{a, 1, m} : Strided{a, k, 1};
}

Strided view_b(Layout layout, const double* b, std::size_t n, std::size_t k) {
  return layout == Layout::NT ? Strided{b, 1, k} : Strided{b, n, 1};
}

// packed[kk*kNR + c] = B(k0+kk, j0+c), zero padded past n.
void pack_b(const Strided& b, std::size_t k0, std::size_t kc, std::size_t j0,
            std::size_t n, double* packed) {
  const std::size_t nr = std::min(kNR, n - j0);
  for (std::size_t kk = 0; kk < kc; ++kk) {
    double* dst = packed + kk * kNR;
    std::size_t c = 0;
    for (; c < nr; ++c) dst[c] = b(k0 + kk, j0 + c);
    for (; c < kNR; ++c) dst[c] = 0.0;
  }
}

// packed[kk*kMR + r] = A(i0+r, k0+kk), zero padded past m.
void pack_a(const Strided& a, std::size_t k0, std::size_t kc, std::size_t i0,
            std::size_t m, double* packed) {
  const std::size_t mr = std::min(kMR, m - i0);
  for (std::size_t kk = 0; kk < kc; ++kk) {
    double* dst = packed + kk * kMR;
    std::size_t r = 0;
    for (; r < mr; ++r) dst[r] = a(i0 + r, k0 + kk);
    for (; r < kMR; ++r) dst[r] = 0.0;
  }
}

void micro_kernel(std::size_t kc, const double* pa, const double* pb, double* c,
                  std::size_t ldc, std::size_t mr, std::size_t nr, bool overwrite) {
  v8d acc0[kMR] = {};
  v8d acc1[kMR] = {};
  for (std::size_t kk = 0; kk < kc; ++kk) {
    const v8d b0 = load8(pb + kk * kNR);
    const v8d b1 = load8(pb + kk * kNR + 8);
    const double* ar = pa + kk * kMR;
    for (std::size_t r = 0; r < kMR; ++r) {
      acc0[r] += ar[r] * b0;
      acc1[r] += ar[r] * b1;
    }
  }
  for (std::size_t r = 0; r < mr; ++r) {
    double* crow = c + r * ldc;
    for (std::size_t j = 0; j < nr; ++j) {
      const double v = j < 8 ? acc0[r][j] : acc1[r][j - 8];
      crow[j] = overwrite ? v : crow[j] + v;
    }
  }
}

}  // namespace

void gemm(Layout layout, std::size_t m, std::size_t n, std::size_t k,
          std::span<const double> a, std::span<const double> b, std::span<double> c,
          bool accumulate) {
  check_sizes(layout, m, n, k, a.size(), b.size(), c.size());
  if (m == 0 || n == 0) return;
  if (k == 0) {
    if (!accumulate) std::fill_n(c.data(), m * n, 0.0);
    return;
  }
  const Strided av = view_a(layout, a.data(), m, k);
  const Strided bv = view_b(layout, b.data(), n, k);
  const std::size_t n_panels = (n + kNR - 1) / kNR;
  const std::size_t m_blocks = (m + kMR - 1) / kMR;
  const bool parallel = m * n * k >= kParallelFlops;

  std::vector<double> packed_b(n_panels * kNR * std::min(k, kKC));
  for (std::size_t k0 = 0; k0 < k; k0 += kKC) {
    const std::size_t kc = std::min(kKC, k - k0);
    const bool overwrite = !accumulate && k0 == 0;

#pragma omp parallel for schedule(static) if (parallel)
    for (std::size_t p = 0; p < n_panels; ++p)
      pack_b(bv, k0, kc, p * kNR, n, packed_b.data() + p * kNR * kc);

#pragma omp parallel if (parallel)
    {
      std::vector<double> packed_a(kMR * kc);
#pragma omp for schedule(static)
      for (std::size_t blk = 0; blk < m_blocks; ++blk) {
        const std::size_t i0 = blk * kMR;
        const std::size_t mr = std::min(kMR, m - i0);
        pack_a(av, k0, kc, i0, m, packed_a.data());
        for (std::size_t p = 0; p < n_panels; ++p) {
          const std::size_t j0 = p * kNR;
          micro_kernel(kc, packed_a.data(), packed_b.data() + p * kNR * kc,
                       c.data() + i0 * n + j0, n, mr, std::min(kNR, n - j0), overwrite);
        }
      }
    }
  }
}

void column_sum(std::size_t rows, std::size_t cols, std::span<const double> x,
                std::span<double> out, bool accumulate) {
  if (x.size() < rows * cols || out.size() < cols)
    throw ShapeError("column_sum: buffer sizes do not match " + std::to_string(rows) + "x" +
                     std::to_string(cols));
  // Parallel over columns; each column sums its rows top to bottom.
#pragma omp parallel for schedule(static) if (rows * cols >= kParallelFlops)
  for (std::size_t j = 0; j < cols; ++j) {
    double s = accumulate ? out[j] : 0.0;
    for (std::size_t i = 0; i < rows; ++i) s += x[i * cols + j];
    out[j] = s;
  }
}

void joint_histogram(std::span<const std::uint16_t> a, std::span<const std::uint16_t> b,
                     std::size_t bins_b, std::span<std::uint64_t> counts) {
  if (a.size() != b.size()) throw ShapeError("joint_histogram: sample vectors differ in length");
  const std::size_t n = a.size();
  // Integer counts: the merge order cannot change the result.
#pragma omp parallel if (n >= kParallelFlops)
  {
    std::vector<std::uint64_t> local(counts.size(), 0);
#pragma omp for schedule(static) nowait
    for (std::size_t i = 0; i < n; ++i) ++local[std::size_t{a[i]} * bins_b + b[i]];
#pragma omp critical
    for (std::size_t j = 0; j < counts.size(); ++j) counts[j] += local[j];
  }
}

namespace reference {

void gemm(Layout layout, std::size_t m, std::size_t n, std::size_t k,
          std::span<const double> a, std::span<const double> b, std::span<double> c,
          bool accumulate) {
  check_sizes(layout, m, n, k, a.size(), b.size(), c.size());
  const Strided av = view_a(layout, a.data(), m, k);
  const Strided bv = view_b(layout, b.data(), n, k);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t kk = 0; kk < k; ++kk) s += av(i, kk) * bv(kk, j);
      c[i * n + j] = accumulate ? c[i * n + j] + s : s;
    }
  }
}

void column_sum(std::size_t rows, std::size_t cols, std::span<const double> x,
                std::span<double> out, bool accumulate) {
  for (std::size_t j = 0; j < cols; ++j) {
    double s = accumulate ? out[j] : 0.0;
    for (std::size_t i = 0; i < rows; ++i) s += x[i * cols + j];
    out[j] = s;
  }
}

void joint_histogram(std::span<const std::uint16_t> a, std::span<const std::uint16_t> b,
                     std::size_t bins_b, std::span<std::uint64_t> counts) {
  if (a.size() != b.size()) throw ShapeError("joint_histogram: sample vectors differ in length");
  for (std::size_t i = 0; i < a.size(); ++i) ++counts[std::size_t{a[i]} * bins_b + b[i]];
}

}  // namespace reference
}  // namespace simvae::kernels
