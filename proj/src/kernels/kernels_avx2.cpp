// AVX2 variants. This file is compiled with -mavx2 and is only entered after
// the dispatcher has confirmed CPU support.
#include "star/kernels.hpp"

#include <immintrin.h>

namespace star::simd {
namespace {

inline double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_add_pd(acc0, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
        acc1 = _mm256_add_pd(acc1, _mm256_mul_pd(_mm256_loadu_pd(a + i + 4),
                                                 _mm256_loadu_pd(b + i + 4)));
    }
    double acc = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

double sum_avx2(const double* a, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(a + i));
        acc1 = _mm256_add_pd(acc1, _mm256_loadu_pd(a + i + 4));
    }
    double acc = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) acc += a[i];
    return acc;
}

void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
        _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

void xpby_avx2(const double* x, double b, double* y, std::size_t n) {
    const __m256d vb = _mm256_set1_pd(b);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d prod = _mm256_mul_pd(vb, _mm256_loadu_pd(y + i));
        _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(x + i), prod));
    }
    for (; i < n; ++i) y[i] = x[i] + b * y[i];
}

void project2d_avx2(const double* xs, const double* ys, double c, double s, double* out,
                    std::size_t n) {
    const __m256d vc = _mm256_set1_pd(c);
    const __m256d vs = _mm256_set1_pd(s);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d px = _mm256_mul_pd(_mm256_loadu_pd(xs + i), vc);
        const __m256d py = _mm256_mul_pd(_mm256_loadu_pd(ys + i), vs);
        _mm256_storeu_pd(out + i, _mm256_add_pd(px, py));
    }
    for (; i < n; ++i) out[i] = xs[i] * c + ys[i] * s;
}

void seqstep_mask_avx2(const double* p, double pstar, double ratio, double hi, double* g,
                       double* h, std::size_t n) {
    const __m256d one = _mm256_set1_pd(1.0);
    const __m256d vr = _mm256_set1_pd(ratio);
    const __m256d vps = _mm256_set1_pd(pstar);
    const __m256d vhi = _mm256_set1_pd(hi);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d vp = _mm256_loadu_pd(p + i);
        const __m256d refl = _mm256_mul_pd(vr, _mm256_sub_pd(one, vp));
        _mm256_storeu_pd(g + i, _mm256_min_pd(refl, vp));
        const __m256d above = _mm256_cmp_pd(vp, vps, _CMP_GT_OQ);
        _mm256_storeu_pd(h + i, _mm256_and_pd(above, vhi));
    }
    for (; i < n; ++i) {
        const double reflected = ratio * (1.0 - p[i]);
        g[i] = reflected < p[i] ? reflected : p[i];
        h[i] = p[i] > pstar ? hi : 0.0;
    }
}

void weighted_gram_avx2(const double* x, const double* w, std::size_t n, std::size_t m,
                        double* gram) {
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = x + i * m;
        const double wi = w[i];
        for (std::size_t a = 0; a < m; ++a) {
            const double wa = wi * row[a];
            const __m256d vwa = _mm256_set1_pd(wa);
            double* out = gram + a * m;
            std::size_t b = a;
            for (; b + 4 <= m; b += 4) {
                const __m256d prod = _mm256_mul_pd(vwa, _mm256_loadu_pd(row + b));
                _mm256_storeu_pd(out + b, _mm256_add_pd(_mm256_loadu_pd(out + b), prod));
            }
            for (; b < m; ++b) out[b] += wa * row[b];
        }
    }
}

void weighted_xty_avx2(const double* x, const double* w, const double* r, std::size_t n,
                       std::size_t m, double* out) {
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = x + i * m;
        const double wr = w[i] * r[i];
        const __m256d vwr = _mm256_set1_pd(wr);
        std::size_t a = 0;
        for (; a + 4 <= m; a += 4) {
            const __m256d prod = _mm256_mul_pd(vwr, _mm256_loadu_pd(row + a));
            _mm256_storeu_pd(out + a, _mm256_add_pd(_mm256_loadu_pd(out + a), prod));
        }
        for (; a < m; ++a) out[a] += wr * row[a];
    }
}

void haar_split_avx2(const double* in, double k, double* lo, double* hi, std::size_t half) {
    const __m256d vk = _mm256_set1_pd(k);
    std::size_t i = 0;
    for (; i + 4 <= half; i += 4) {
        const __m256d v0 = _mm256_loadu_pd(in + 2 * i);      // a0 b0 a1 b1
        const __m256d v1 = _mm256_loadu_pd(in + 2 * i + 4);  // a2 b2 a3 b3
        const __m256d evens = _mm256_unpacklo_pd(v0, v1);    // a0 a2 a1 a3
        const __m256d odds = _mm256_unpackhi_pd(v0, v1);     // b0 b2 b1 b3
        const __m256d s = _mm256_mul_pd(_mm256_add_pd(evens, odds), vk);
        const __m256d d = _mm256_mul_pd(_mm256_sub_pd(evens, odds), vk);
        _mm256_storeu_pd(lo + i, _mm256_permute4x64_pd(s, 0xD8));
        _mm256_storeu_pd(hi + i, _mm256_permute4x64_pd(d, 0xD8));
    }
    for (; i < half; ++i) {
        const double a = in[2 * i];
        const double b = in[2 * i + 1];
        lo[i] = (a + b) * k;
        hi[i] = (a - b) * k;
    }
}

void haar_merge_avx2(const double* lo, const double* hi, double k, double* out,
                     std::size_t half) {
    const __m256d vk = _mm256_set1_pd(k);
    std::size_t i = 0;
    for (; i + 4 <= half; i += 4) {
        const __m256d l = _mm256_loadu_pd(lo + i);
        const __m256d h = _mm256_loadu_pd(hi + i);
        const __m256d s = _mm256_mul_pd(_mm256_add_pd(l, h), vk);
        const __m256d d = _mm256_mul_pd(_mm256_sub_pd(l, h), vk);
        const __m256d u0 = _mm256_unpacklo_pd(s, d);  // s0 d0 s2 d2
        const __m256d u1 = _mm256_unpackhi_pd(s, d);  // s1 d1 s3 d3
        _mm256_storeu_pd(out + 2 * i, _mm256_permute2f128_pd(u0, u1, 0x20));
        _mm256_storeu_pd(out + 2 * i + 4, _mm256_permute2f128_pd(u0, u1, 0x31));
    }
    for (; i < half; ++i) {
        out[2 * i] = (lo[i] + hi[i]) * k;
        out[2 * i + 1] = (lo[i] - hi[i]) * k;
    }
}

const KernelTable kAvx2{
    Isa::Avx2,        dot_avx2,           sum_avx2,
    axpy_avx2,        xpby_avx2,          project2d_avx2,
    seqstep_mask_avx2, weighted_gram_avx2, weighted_xty_avx2,
    haar_split_avx2,  haar_merge_avx2,
};

}  // namespace

const KernelTable* avx2_table_unchecked() { return &kAvx2; }

}  // namespace star::simd
