#pragma once

// Dense inner-loop kernels used by the convolution and affine layers.
//
// Each kernel has a portable scalar reference and, on x86-64 builds, an AVX2/FMA variant.
// The variant is chosen once at first use from the CPU features, and can be forced with
// POOLBENCH_SIMD=scalar|avx2|auto or select_isa(). Results differ between variants only by
// floating-point summation order; a given variant is deterministic.

#include <span>
#include <string_view>

namespace poolbench::kernels {

enum class Isa { Scalar, Avx2 };

std::string_view isa_name(Isa isa) noexcept;
bool isa_available(Isa isa) noexcept;
Isa active_isa() noexcept;
// Throws ConfigError when the requested variant is not available on this CPU/build.
void select_isa(Isa isa);

// Sum of a[i] * b[i]. Sizes must match.
double dot(std::span<const double> a, std::span<const double> b);
// y[i] += alpha * x[i]. Sizes must match.
void axpy(double alpha, std::span<const double> x, std::span<double> y);

namespace scalar {
double dot(const double* a, const double* b, std::size_t n) noexcept;
void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept;
}  // namespace scalar

namespace avx2 {
double dot(const double* a, const double* b, std::size_t n) noexcept;
void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept;
}  // namespace avx2

}  // namespace poolbench::kernels
