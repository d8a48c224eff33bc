#pragma once

// Dense kernels behind the tensor ops and the MI estimator. Every kernel has
// a plain serial counterpart in `reference`; the optimized versions are
// tested against those and benchmarked in bench/.
//
// Parallel kernels split work over disjoint output blocks only, and each
// output element is accumulated in a fixed order, so results are identical
// for any OpenMP thread count.

#include <cstddef>
#include <cstdint>
#include <span>

namespace simvae::kernels {

/// Which operand is stored transposed. A is logically m×k, B is k×n.
enum class Layout { NN, TN, NT };

/// C(m×n) = op(A)·op(B), or C += ... when `accumulate` is set.
///   NN: A stored m×k, B stored k×n
///   TN: A stored k×m, B stored k×n
///   NT: A stored m×k, B stored n×k
void gemm(Layout layout, std::size_t m, std::size_t n, std::size_t k,
          std::span<const double> a, std::span<const double> b,
          std::span<double> c, bool accumulate = false);

/// out[j] (+)= sum_i x[i*cols + j]
void column_sum(std::size_t rows, std::size_t cols, std::span<const double> x,
                std::span<double> out, bool accumulate = false);

/// counts[a[i]*bins_b + b[i]] += 1. `counts` must be zeroed by the caller.
void joint_histogram(std::span<const std::uint16_t> a, std::span<const std::uint16_t> b,
                     std::size_t bins_b, std::span<std::uint64_t> counts);

namespace reference {

void gemm(Layout layout, std::size_t m, std::size_t n, std::size_t k,
          std::span<const double> a, std::span<const double> b,
          std::span<double> c, bool accumulate = false);

void column_sum(std::size_t rows, std::size_t cols, std::span<const double> x,
                std::span<double> out, bool accumulate = false);

void joint_histogram(std::span<const std::uint16_t> a, std::span<const std::uint16_t> b,
                     std::size_t bins_b, std::span<std::uint64_t> counts);

}  // namespace reference
}  // namespace simvae::kernels
