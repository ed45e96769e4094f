#pragma once
// Data-parallel inner loops used across the engine.
//
// Every kernel has a scalar reference implementation and, on x86-64, an AVX2
// variant compiled in its own translation unit with -mavx2. The active table
// is chosen once at startup from CPUID; STAR_SIMD=scalar in the environment
// forces the reference path. Elementwise kernels are bit-identical across
// variants; reductions agree to rounding.

#include <cstddef>
#include <span>
#include <string_view>

namespace star::simd {

enum class Isa { Scalar, Avx2 };

struct KernelTable {
    Isa isa;

    double (*dot)(const double* a, const double* b, std::size_t n);
    double (*sum)(const double* a, std::size_t n);
    // y += a * x
    void (*axpy)(double a, const double* x, double* y, std::size_t n);
    // y = x + b * y  (CG direction update)
    void (*xpby)(const double* x, double b, double* y, std::size_t n);
    // out[i] = xs[i] * c + ys[i] * s
    void (*project2d)(const double* xs, const double* ys, double c, double s,
                      double* out, std::size_t n);
    // g[i] = min(p[i], ratio * (1 - p[i])); h[i] = p[i] > pstar ? hi : 0
    void (*seqstep_mask)(const double* p, double pstar, double ratio, double hi,
                         double* g, double* h, std::size_t n);
    // gram (m x m, row-major, upper triangle filled) += sum_i w[i] x_i x_i^T
    // where x_i is row i of the n x m row-major matrix.
    void (*weighted_gram)(const double* x, const double* w, std::size_t n, std::size_t m,
                          double* gram);
    // out (m) = sum_i w[i] * r[i] * x_i
    void (*weighted_xty)(const double* x, const double* w, const double* r, std::size_t n,
                         std::size_t m, double* out);
    // lo[i] = (in[2i] + in[2i+1]) * k, hi[i] = (in[2i] - in[2i+1]) * k
    void (*haar_split)(const double* in, double k, double* lo, double* hi, std::size_t half);
    // out[2i] = (lo[i] + hi[i]) * k, out[2i+1] = (lo[i] - hi[i]) * k
    void (*haar_merge)(const double* lo, const double* hi, double k, double* out,
                       std::size_t half);
};

const KernelTable& scalar_kernels();
// nullptr when the variant was not compiled in or the CPU lacks it.
const KernelTable* avx2_kernels();

// The table selected for this process.
const KernelTable& kernels();
// Overrides the selection; used by tests and benchmarks.
void select(Isa isa);
Isa detect();
std::string_view name(Isa isa);

inline double dot(std::span<const double> a, std::span<const double> b) {
    return kernels().dot(a.data(), b.data(), a.size());
}
inline double sum(std::span<const double> a) { return kernels().sum(a.data(), a.size()); }

}  // namespace star::simd
