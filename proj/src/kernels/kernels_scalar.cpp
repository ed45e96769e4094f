#include "star/kernels.hpp"

#include <algorithm>

namespace star::simd {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

double sum_scalar(const double* a, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i];
    return acc;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void xpby_scalar(const double* x, double b, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i] + b * y[i];
}

void project2d_scalar(const double* xs, const double* ys, double c, double s, double* out,
                      std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = xs[i] * c + ys[i] * s;
}

void seqstep_mask_scalar(const double* p, double pstar, double ratio, double hi, double* g,
                         double* h, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        const double reflected = ratio * (1.0 - p[i]);
        g[i] = std::min(p[i], reflected);
        h[i] = p[i] > pstar ? hi : 0.0;
    }
}

void weighted_gram_scalar(const double* x, const double* w, std::size_t n, std::size_t m,
                          double* gram) {
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = x + i * m;
        const double wi = w[i];
        for (std::size_t a = 0; a < m; ++a) {
            const double wa = wi * row[a];
            double* out = gram + a * m;
            for (std::size_t b = a; b < m; ++b) out[b] += wa * row[b];
        }
    }
}

void weighted_xty_scalar(const double* x, const double* w, const double* r, std::size_t n,
                         std::size_t m, double* out) {
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = x + i * m;
        const double wr = w[i] * r[i];
        for (std::size_t a = 0; a < m; ++a) out[a] += wr * row[a];
    }
}

void haar_split_scalar(const double* in, double k, double* lo, double* hi, std::size_t half) {
    for (std::size_t i = 0; i < half; ++i) {
        const double a = in[2 * i];
        const double b = in[2 * i + 1];
        lo[i] = (a + b) * k;
        hi[i] = (a - b) * k;
    }
}

void haar_merge_scalar(const double* lo, const double* hi, double k, double* out,
                       std::size_t half) {
    for (std::size_t i = 0; i < half; ++i) {
        out[2 * i] = (lo[i] + hi[i]) * k;
        out[2 * i + 1] = (lo[i] - hi[i]) * k;
    }
}

const KernelTable kScalar{
    Isa::Scalar,        dot_scalar,           sum_scalar,
    axpy_scalar,        xpby_scalar,          project2d_scalar,
    seqstep_mask_scalar, weighted_gram_scalar, weighted_xty_scalar,
    haar_split_scalar,  haar_merge_scalar,
};

}  // namespace

const KernelTable& scalar_kernels() { return kScalar; }

}  // namespace star::simd
