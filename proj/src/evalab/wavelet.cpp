#include <algorithm>
#include <bit>
#include <cmath>
#include <iostream>
#include <numbers>
#include <stdexcept>

#include "star/evalab.hpp"
#include "star/kernels.hpp"
#include "star/normal.hpp"

namespace star::evalab {
namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kMadScale = 0.6745;
constexpr double kSigmaFloor = 1e-12;

void transform_rows(std::vector<double>& a, std::size_t side, std::size_t s, bool forward,
                    std::vector<double>& tmp) {
    const auto& k = simd::kernels();
    const std::size_t half = s / 2;
    for (std::size_t r = 0; r < s; ++r) {
        double* row = a.data() + r * side;
        if (forward)
            k.haar_split(row, kInvSqrt2, tmp.data(), tmp.data() + half, half);
        else
            k.haar_merge(row, row + half, kInvSqrt2, tmp.data(), half);
        std::copy(tmp.begin(), tmp.begin() + static_cast<std::ptrdiff_t>(s), row);
    }
}

void transform_cols(std::vector<double>& a, std::size_t side, std::size_t s, bool forward,
                    std::vector<double>& col, std::vector<double>& tmp) {
    const auto& k = simd::kernels();
    const std::size_t half = s / 2;
    for (std::size_t c = 0; c < s; ++c) {
        for (std::size_t r = 0; r < s; ++r) col[r] = a[r * side + c];
        if (forward)
            k.haar_split(col.data(), kInvSqrt2, tmp.data(), tmp.data() + half, half);
        else
            k.haar_merge(col.data(), col.data() + half, kInvSqrt2, tmp.data(), half);
        for (std::size_t r = 0; r < s; ++r) a[r * side + c] = tmp[r];
    }
}

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    const double hi = v[mid];
    if (v.size() % 2 == 1) return hi;
    const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lo + hi);
}

double variance(const std::vector<double>& x) {
    double m = 0.0;
    for (double v : x) m += v;
    m /= static_cast<double>(x.size());
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return s / static_cast<double>(x.size());
}

}  // namespace

WaveletDataset haar_dwt2(const Image& img) {
    const std::size_t side = img.rows;
    if (side == 0 || img.cols != side || !std::has_single_bit(side))
        throw std::invalid_argument("haar: image must be square with a power-of-two side");
    if (img.px.size() != side * side) throw std::invalid_argument("haar: pixel buffer has wrong size");
    WaveletDataset ws;
    ws.side = side;
    ws.levels = std::countr_zero(side);
    ws.coeffs = img.px;
    std::vector<double> col(side), tmp(side);
    for (std::size_t s = side; s >= 2; s /= 2) {
        transform_rows(ws.coeffs, side, s, true, tmp);
        transform_cols(ws.coeffs, side, s, true, col, tmp);
    }
    return ws;
}

Image haar_idwt2(const WaveletDataset& ws) {
    const std::size_t side = ws.side;
    if (side == 0 || !std::has_single_bit(side) || ws.coeffs.size() != side * side)
        throw std::invalid_argument("haar: coefficient array is not a square power-of-two grid");
    Image img{side, side, ws.coeffs};
    std::vector<double> col(side), tmp(side);
    for (std::size_t s = 2; s <= side; s *= 2) {
        transform_cols(img.px, side, s, false, col, tmp);
        transform_rows(img.px, side, s, false, tmp);
    }
    return img;
}

int subband(std::size_t /*side*/, std::size_t row, std::size_t col) {
    if (row == 0 && col == 0) return -1;
    const std::size_t b = std::bit_floor(std::max(row, col));
    if (row < b) return 0;
    if (col < b) return 1;
    return 2;
}

WaveletTests wavelet_pvalues(const WaveletDataset& ws, bool two_sided) {
    const std::size_t side = ws.side;
    const std::size_t n = side * side;
    WaveletTests t;
    t.p.assign(n, 0.0);
    t.parent.assign(n, -1);
    const std::size_t b = side / 2;
    for (int w = 0; w < 3; ++w) {
        std::vector<double> mags;
        mags.reserve(b * b);
        const std::size_t r0 = w == 0 ? 0 : b;
        const std::size_t c0 = w == 1 ? 0 : b;
        for (std::size_t r = 0; r < b; ++r)
            for (std::size_t c = 0; c < b; ++c) mags.push_back(std::abs(ws.coeffs[(r0 + r) * side + c0 + c]));
        double sigma = median(std::move(mags)) / kMadScale;
        if (!(sigma > kSigmaFloor)) {
            sigma = kSigmaFloor;
            t.sigma_floored = true;
        }
        t.sigma_hat[w] = sigma;
    }
    if (t.sigma_floored)
        std::cerr << "warning: a wavelet sub-band has zero median magnitude; sigma floored at "
                  << kSigmaFloor << "\n";
    for (std::size_t r = 0; r < side; ++r) {
        for (std::size_t c = 0; c < side; ++c) {
            const int w = subband(side, r, c);
            if (w < 0) continue;
            const std::size_t i = r * side + c;
            const double z = ws.coeffs[i] / t.sigma_hat[w];
            t.p[i] = two_sided ? std::min(1.0, 2.0 * stats::normal_sf(std::abs(z))) : stats::normal_sf(z);
            t.parent[i] = static_cast<Id>((r / 2) * side + c / 2);
        }
    }
    return t;
}

Image reconstruct(const WaveletDataset& ws, std::span<const Id> keep) {
    WaveletDataset kept = ws;
    std::fill(kept.coeffs.begin(), kept.coeffs.end(), 0.0);
    kept.coeffs[0] = ws.coeffs[0];
    for (Id i : keep) kept.coeffs[i] = ws.coeffs[i];
    return haar_idwt2(kept);
}

ThresholdResult threshold_baseline(const WaveletDataset& ws, const WaveletTests& tests, bool soft) {
    const std::size_t side = ws.side;
    const double log_n = std::log(static_cast<double>(side * side));
    ThresholdResult out;
    out.shrunk = ws;
    out.selected.push_back(0);
    for (std::size_t r = 0; r < side; ++r) {
        for (std::size_t c = 0; c < side; ++c) {
            const int w = subband(side, r, c);
            if (w < 0) continue;
            const std::size_t i = r * side + c;
            const double lambda = tests.sigma_hat[w] * std::sqrt(2.0 * log_n);
            const double d = ws.coeffs[i];
            if (std::abs(d) > lambda) {
                out.selected.push_back(static_cast<Id>(i));
                if (soft) out.shrunk.coeffs[i] = std::copysign(std::abs(d) - lambda, d);
            } else {
                out.shrunk.coeffs[i] = 0.0;
            }
        }
    }
    return out;
}

double snr_db(const Image& original, const Image& recon) {
    if (original.px.size() != recon.px.size()) throw std::invalid_argument("snr: size mismatch");
    double mse = 0.0;
    for (std::size_t i = 0; i < original.px.size(); ++i) {
        const double e = recon.px[i] - original.px[i];
        mse += e * e;
    }
    mse /= static_cast<double>(original.px.size());
    if (mse == 0.0) return kInfinity;
    return 10.0 * std::log10(variance(original.px) / mse);
}

double compression_ratio(std::size_t total, std::size_t selected) {
    if (selected == 0) return kInfinity;
    return static_cast<double>(total) / static_cast<double>(selected);
}

Image synthetic_image(std::size_t side) {
    Image img{side, side, std::vector<double>(side * side, 40.0)};
    const double s = static_cast<double>(side);
    for (std::size_t r = 0; r < side; ++r) {
        for (std::size_t c = 0; c < side; ++c) {
            const double y = static_cast<double>(r) + 0.5, x = static_cast<double>(c) + 0.5;
            double v = 40.0;
            if (y >= 0.8 * s) v = 90.0;
            if (x >= 0.125 * s && x < 0.5 * s && y >= 0.125 * s && y < 0.625 * s) v = 130.0;
            const double dx = x - 0.7 * s, dy = y - 0.4 * s;
            if (dx * dx + dy * dy <= 0.2 * s * 0.2 * s) v = 210.0;
            img.px[r * side + c] = v;
        }
    }
    return img;
}

Image add_noise(const Image& img, double snr, Rng& rng) {
    const double sigma = std::sqrt(variance(img.px) / std::pow(10.0, snr / 10.0));
    std::normal_distribution<double> norm(0.0, sigma);
    Image out = img;
    for (auto& v : out.px) v += norm(rng);
    return out;
}

DenoiseReport denoise(const Image& original, const Image& noisy, double alpha_star, double alpha_bh,
                      bool two_sided) {
    DenoiseReport rep;
    const WaveletDataset ws = haar_dwt2(noisy);
    const Image back = haar_idwt2(ws);
    for (std::size_t i = 0; i < noisy.px.size(); ++i)
        rep.roundtrip_error = std::max(rep.roundtrip_error, std::abs(back.px[i] - noisy.px[i]));
    const WaveletTests tests = wavelet_pvalues(ws, two_sided);
    rep.sigma_hat = tests.sigma_hat;
    rep.input_snr = snr_db(original, noisy);
    const std::size_t total = ws.coeffs.size();

    auto add = [&](std::string name, IdSet selected, Image recon) {
        DenoiseMethod m;
        m.name = std::move(name);
        m.selected = selected.size();
        m.cr = compression_ratio(total, selected.size());
        m.snr = snr_db(original, recon);
        m.recon = std::move(recon);
        rep.methods.push_back(std::move(m));
    };

    {
        Dataset data;
        data.n = total;
        data.dim = 1;
        data.covariates.resize(total);
        for (std::size_t i = 0; i < total; ++i) {
            const std::size_t r = i / ws.side, c = i % ws.side;
            data.covariates[i] = static_cast<double>(std::bit_width(std::max(r, c)));
        }
        data.p = tests.p;
        engine::Session s(std::move(data), AccumulatorSpec::seqstep(0.5), ConstraintSpec::tree(tests.parent),
                          alpha_star, 0);
        scores::CanonicalRule rule;
        engine::run_auto(s, rule);
        IdSet sel = s.rejection();
        Image recon = reconstruct(ws, sel);
        add("star", std::move(sel), std::move(recon));
    }
    {
        std::vector<double> detail(tests.p.begin() + 1, tests.p.end());
        IdSet sel{0};
        for (Id i : bh(detail, alpha_bh)) sel.push_back(i + 1);
        Image recon = reconstruct(ws, sel);
        add("bh", std::move(sel), std::move(recon));
    }
    for (bool soft : {false, true}) {
        ThresholdResult t = threshold_baseline(ws, tests, soft);
        Image recon = haar_idwt2(t.shrunk);
        add(soft ? "soft" : "hard", std::move(t.selected), std::move(recon));
    }
    return rep;
}

EmpiricalDistribution::EmpiricalDistribution(std::vector<double> sample) : sorted_(std::move(sample)) {
    if (sorted_.empty()) throw std::invalid_argument("empirical distribution needs a sample");
    std::sort(sorted_.begin(), sorted_.end());
}

double EmpiricalDistribution::cdf(double x) const {
    return static_cast<double>(std::upper_bound(sorted_.begin(), sorted_.end(), x) - sorted_.begin()) /
           static_cast<double>(sorted_.size());
}

double EmpiricalDistribution::cdf_left(double x) const {
    return static_cast<double>(std::lower_bound(sorted_.begin(), sorted_.end(), x) - sorted_.begin()) /
           static_cast<double>(sorted_.size());
}

double randomized_pvalue(double y, const EmpiricalDistribution& f0, double offset, double u) {
    const double x = y - offset;
    const double left = f0.cdf_left(x);
    const double mass = f0.cdf(x) - left;
    return std::clamp(1.0 - left - u * mass, 0.0, 1.0);
}

double ks_uniform(std::vector<double> sample) {
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double x = std::clamp(sample[i], 0.0, 1.0);
        d = std::max({d, (static_cast<double>(i) + 1.0) / n - x, x - static_cast<double>(i) / n});
    }
    return d;
}

}  // namespace star::evalab
