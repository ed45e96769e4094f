#include "star/accum.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "star/kernels.hpp"

namespace star::accum {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr int kBisectionCap = 200;
constexpr double kBisectionTol = 1e-12;

void check_probability(double p, const char* what) {
    if (!(p >= 0.0 && p <= 1.0)) {
        throw std::domain_error(std::string(what) + ": argument " + std::to_string(p) +
                                " outside [0, 1]");
    }
}

void check_open_unit(double v, const char* what) {
    if (!(v > 0.0 && v < 1.0)) {
        throw std::invalid_argument(std::string(what) + " must lie in (0, 1), got " +
                                    std::to_string(v));
    }
}

bool same(double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; }

// (1-p) log(1-p), continuous at p = 1.
double xlogx_complement(double p) {
    if (p >= 1.0) return 0.0;
    return (1.0 - p) * std::log1p(-p);
}

}  // namespace

std::string to_string(Family f) {
    switch (f) {
        case Family::SeqStep:
            return "seqstep";
        case Family::ForwardStop:
            return "forwardstop";
        case Family::HingeExp:
            return "hingeexp";
        case Family::PiecewiseConstant:
            return "piecewise";
    }
    return "unknown";
}

Family family_from_string(const std::string& s) {
    if (s == "seqstep") return Family::SeqStep;
    if (s == "forwardstop") return Family::ForwardStop;
    if (s == "hingeexp") return Family::HingeExp;
    if (s == "piecewise") return Family::PiecewiseConstant;
    throw std::invalid_argument("unknown accumulator kind '" + s + "'");
}

double AccumulatorSpec::default_forward_stop_cap() { return -std::log(0.01); }

AccumulatorSpec AccumulatorSpec::seqstep(double pstar) {
    check_open_unit(pstar, "seqstep pstar");
    AccumulatorSpec spec;
    spec.family_ = Family::SeqStep;
    spec.pstar_ = pstar;
    spec.cap_ = std::numeric_limits<double>::infinity();
    spec.finish();
    return spec;
}

AccumulatorSpec AccumulatorSpec::forward_stop(double cap) {
    if (!(cap > 0.0) || !std::isfinite(cap)) {
        throw std::invalid_argument("forwardstop cap must be positive and finite");
    }
    AccumulatorSpec spec;
    spec.family_ = Family::ForwardStop;
    spec.pstar_ = kNaN;
    spec.cap_ = cap;
    spec.finish();
    return spec;
}

AccumulatorSpec AccumulatorSpec::hinge_exp(double pstar) {
    check_open_unit(pstar, "hingeexp pstar");
    return hinge_exp(pstar, -std::log(0.01) / (1.0 - pstar));
}

AccumulatorSpec AccumulatorSpec::hinge_exp(double pstar, double cap) {
    check_open_unit(pstar, "hingeexp pstar");
    if (!(cap > 0.0) || !std::isfinite(cap)) {
        throw std::invalid_argument("hingeexp cap must be positive and finite");
    }
    AccumulatorSpec spec;
    spec.family_ = Family::HingeExp;
    spec.pstar_ = pstar;
    spec.cap_ = cap;
    spec.finish();
    return spec;
}

AccumulatorSpec AccumulatorSpec::piecewise_constant(std::vector<double> breaks,
                                                    std::vector<double> values) {
    if (breaks.size() < 2 || values.size() + 1 != breaks.size()) {
        throw std::invalid_argument("piecewise accumulator needs k+1 breaks for k values");
    }
    if (breaks.front() != 0.0 || breaks.back() != 1.0) {
        throw std::invalid_argument("piecewise breaks must start at 0 and end at 1");
    }
    for (std::size_t j = 0; j + 1 < breaks.size(); ++j) {
        if (!(breaks[j] < breaks[j + 1])) {
            throw std::invalid_argument("piecewise breaks must be strictly increasing");
        }
    }
    for (std::size_t j = 0; j < values.size(); ++j) {
        if (!(values[j] >= 0.0) || !std::isfinite(values[j])) {
            throw std::invalid_argument("piecewise values must be finite and non-negative");
        }
        if (j > 0 && values[j] < values[j - 1]) {
            throw std::invalid_argument("piecewise values must be non-decreasing");
        }
    }
    AccumulatorSpec spec;
    spec.family_ = Family::PiecewiseConstant;
    spec.pstar_ = kNaN;
    spec.cap_ = std::numeric_limits<double>::infinity();
    spec.breaks_ = std::move(breaks);
    spec.values_ = std::move(values);
    spec.cumulative_.assign(spec.breaks_.size(), 0.0);
    for (std::size_t j = 0; j < spec.values_.size(); ++j) {
        spec.cumulative_[j + 1] =
            spec.cumulative_[j] + spec.values_[j] * (spec.breaks_[j + 1] - spec.breaks_[j]);
    }
    if (!(spec.cumulative_.back() > 0.0)) {
        throw std::invalid_argument("piecewise accumulator integrates to zero");
    }
    if (spec.values_.front() == spec.values_.back()) {
        throw std::invalid_argument("piecewise accumulator must not be constant");
    }
    spec.finish();
    return spec;
}

void AccumulatorSpec::finish() {
    switch (family_) {
        case Family::SeqStep:
            norm_ = 1.0;
            cap_point_ = 1.0;
            flat_lo_ = flat_hi_ = pstar_;
            break;
        case Family::ForwardStop: {
            const double tail = std::exp(-cap_);
            norm_ = 1.0 - tail;
            cap_point_ = 1.0 - tail;
            // -log(1-p) = norm
            flat_lo_ = flat_hi_ = -std::expm1(-norm_);
            break;
        }
        case Family::HingeExp: {
            const double tail = std::exp(-cap_ * (1.0 - pstar_));
            norm_ = 1.0 - tail;
            cap_point_ = 1.0 - (1.0 - pstar_) * tail;
            // log((1-p*)/(1-p)) / (1-p*) = norm
            flat_lo_ = flat_hi_ = 1.0 - (1.0 - pstar_) * std::exp(-norm_ * (1.0 - pstar_));
            break;
        }
        case Family::PiecewiseConstant: {
            norm_ = cumulative_.back();
            cap_point_ = 1.0;
            const double tol = 1e-12;
            // first p with h(p) >= 1 and last p with h(p) <= 1
            flat_lo_ = 1.0;
            for (std::size_t j = 0; j < values_.size(); ++j) {
                if (values_[j] / norm_ >= 1.0 - tol) {
                    flat_lo_ = breaks_[j];
                    break;
                }
            }
            flat_hi_ = 0.0;
            for (std::size_t j = values_.size(); j-- > 0;) {
                if (values_[j] / norm_ <= 1.0 + tol) {
                    flat_hi_ = breaks_[j + 1];
                    break;
                }
            }
            if (flat_hi_ < flat_lo_) {
                // h jumps over 1: the crossing point is a single break
                flat_hi_ = flat_lo_;
            }
            break;
        }
    }
    h_max_ = h(1.0);
}

double AccumulatorSpec::h_raw_capped(double p) const {
    switch (family_) {
        case Family::SeqStep:
            return p > pstar_ ? 1.0 / (1.0 - pstar_) : 0.0;
        case Family::ForwardStop:
            if (p >= cap_point_) return cap_;
            return std::min(-std::log1p(-p), cap_);
        case Family::HingeExp:
            if (p < pstar_) return 0.0;
            if (p >= cap_point_) return cap_;
            return std::min(std::log((1.0 - pstar_) / (1.0 - p)) / (1.0 - pstar_), cap_);
        case Family::PiecewiseConstant: {
            auto it = std::upper_bound(breaks_.begin(), breaks_.end(), p);
            std::size_t j = static_cast<std::size_t>(it - breaks_.begin());
            j = j == 0 ? 0 : j - 1;
            return values_[std::min(j, values_.size() - 1)];
        }
    }
    return 0.0;
}

double AccumulatorSpec::raw_integral(double p) const {
    switch (family_) {
        case Family::SeqStep:
            return p > pstar_ ? (p - pstar_) / (1.0 - pstar_) : 0.0;
        case Family::ForwardStop: {
            if (p <= cap_point_) return xlogx_complement(p) + p;
            const double at_cap = xlogx_complement(cap_point_) + cap_point_;
            return at_cap + cap_ * (p - cap_point_);
        }
        case Family::HingeExp: {
            if (p <= pstar_) return 0.0;
            auto body = [this](double x) {
                const double u = (1.0 - x) / (1.0 - pstar_);
                const double ulogu = u > 0.0 ? u * std::log(u) : 0.0;
                return ulogu + 1.0 - u;
            };
            if (p <= cap_point_) return body(p);
            return body(cap_point_) + cap_ * (p - cap_point_);
        }
        case Family::PiecewiseConstant: {
            auto it = std::upper_bound(breaks_.begin(), breaks_.end(), p);
            std::size_t j = static_cast<std::size_t>(it - breaks_.begin());
            if (j >= breaks_.size()) return cumulative_.back();
            j = j == 0 ? 0 : j - 1;
            return cumulative_[j] + values_[j] * (p - breaks_[j]);
        }
    }
    return 0.0;
}

double AccumulatorSpec::h(double p) const {
    check_probability(p, "h");
    return h_raw_capped(p) / norm_;
}

double AccumulatorSpec::H(double p) const {
    check_probability(p, "H");
    if (p == 0.0 || p == 1.0) return 0.0;
    return raw_integral(p) / norm_ - p;
}

double AccumulatorSpec::solve_on_branch(double target, double lo, double hi,
                                        bool increasing) const {
    // H is monotone on [lo, hi]; find q with H(q) = target.
    for (int it = 0; it < kBisectionCap; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) return mid;
        const double v = raw_integral(mid) / norm_ - mid;
        const bool below = v < target;
        if (below == increasing) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if (hi - lo > kBisectionTol) {
        throw NumericalError("reflection bisection did not converge");
    }
    return 0.5 * (lo + hi);
}

double AccumulatorSpec::s(double p) const {
    check_probability(p, "s");
    if (p == 0.0) return 1.0;
    if (p == 1.0) return 0.0;
    if (family_ == Family::SeqStep) {
        if (p >= pstar_) return pstar_ / (1.0 - pstar_) * (1.0 - p);
        return 1.0 - p * (1.0 - pstar_) / pstar_;
    }
    if (p > flat_lo_ && p < flat_hi_) return flat_lo_ + flat_hi_ - p;
    if (p == flat_lo_) return flat_hi_;
    if (p == flat_hi_) return flat_lo_;
    const double target = H(p);
    if (p < flat_lo_) return solve_on_branch(target, flat_hi_, 1.0, true);
    return solve_on_branch(target, 0.0, flat_lo_, false);
}

double AccumulatorSpec::mask(double p) const {
    check_probability(p, "mask");
    const double mid = 0.5 * (flat_lo_ + flat_hi_);
    if (p <= mid) return p;
    return std::min(p, s(p));
}

PreimagePair AccumulatorSpec::unmask_pair(double q) const {
    check_probability(q, "unmask_pair");
    const double mid = 0.5 * (flat_lo_ + flat_hi_);
    if (q > mid) {
        throw std::domain_error("unmask_pair: " + std::to_string(q) +
                                " exceeds the fixed point " + std::to_string(mid));
    }
    return {q, s(q)};
}

double AccumulatorSpec::fdp_hat(double sum_h, std::size_t set_size) const {
    return (h_max_ + sum_h) / (1.0 + static_cast<double>(set_size));
}

double AccumulatorSpec::s_derivative(double p) const {
    check_probability(p, "s_derivative");
    if (p > flat_lo_ && p < flat_hi_) return -1.0;
    if (family_ == Family::SeqStep) {
        return p <= pstar_ ? -(1.0 - pstar_) / pstar_ : -pstar_ / (1.0 - pstar_);
    }
    double x = p;
    if (x == flat_lo_ || x == flat_hi_) {
        // one-sided: approach from the outer side of the fixed point region
        x = x <= 0.5 * (flat_lo_ + flat_hi_) ? std::max(0.0, flat_lo_ - 1e-9)
                                             : std::min(1.0, flat_hi_ + 1e-9);
    }
    const double num = h_raw_capped(x) / norm_ - 1.0;
    const double den = h_raw_capped(s(x)) / norm_ - 1.0;
    if (den == 0.0) return -1.0;
    return num / den;
}

void AccumulatorSpec::mask_all(std::span<const double> p, std::span<double> g,
                               std::span<double> h) const {
    if (g.size() != p.size() || h.size() != p.size()) {
        throw std::invalid_argument("mask_all: span sizes differ");
    }
    for (double v : p) check_probability(v, "mask_all");
    if (family_ == Family::SeqStep) {
        simd::kernels().seqstep_mask(p.data(), pstar_, pstar_ / (1.0 - pstar_), h_max_,
                                     g.data(), h.data(), p.size());
        return;
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
        g[i] = mask(p[i]);
        h[i] = h_raw_capped(p[i]) / norm_;
    }
}

bool operator==(const AccumulatorSpec& a, const AccumulatorSpec& b) {
    return a.family_ == b.family_ && same(a.pstar_, b.pstar_) && same(a.cap_, b.cap_) &&
           a.breaks_ == b.breaks_ && a.values_ == b.values_;
}

OneBitPValue onebit_from_knockoff(double w) {
    return {w > 0.0 ? 0.5 : 1.0, std::fabs(w)};
}

void to_json(nlohmann::json& j, const AccumulatorSpec& spec) {
    j = nlohmann::json::object();
    j["kind"] = to_string(spec.family());
    switch (spec.family()) {
        case Family::SeqStep:
            j["pstar"] = spec.pstar();
            j["cap"] = nullptr;
            break;
        case Family::ForwardStop:
            j["pstar"] = nullptr;
            j["cap"] = spec.cap();
            break;
        case Family::HingeExp:
            j["pstar"] = spec.pstar();
            j["cap"] = spec.cap();
            break;
        case Family::PiecewiseConstant:
            j["pstar"] = nullptr;
            j["cap"] = nullptr;
            j["breaks"] = spec.breaks();
            j["values"] = spec.values();
            break;
    }
}

AccumulatorSpec accumulator_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw std::invalid_argument("accumulator must be a JSON object");
    if (!j.contains("kind") || !j["kind"].is_string()) {
        throw std::invalid_argument("accumulator.kind: missing or not a string");
    }
    const Family family = family_from_string(j["kind"].get<std::string>());
    auto number = [&](const char* key) -> std::optional<double> {
        if (!j.contains(key) || j[key].is_null()) return std::nullopt;
        if (!j[key].is_number()) {
            throw std::invalid_argument(std::string("accumulator.") + key + ": not a number");
        }
        return j[key].get<double>();
    };
    switch (family) {
        case Family::SeqStep: {
            auto pstar = number("pstar");
            return AccumulatorSpec::seqstep(pstar.value_or(0.5));
        }
        case Family::ForwardStop: {
            auto cap = number("cap");
            return AccumulatorSpec::forward_stop(cap.value_or(AccumulatorSpec::default_forward_stop_cap()));
        }
        case Family::HingeExp: {
            auto pstar = number("pstar");
            if (!pstar) throw std::invalid_argument("accumulator.pstar: required for hingeexp");
            auto cap = number("cap");
            return cap ? AccumulatorSpec::hinge_exp(*pstar, *cap)
                       : AccumulatorSpec::hinge_exp(*pstar);
        }
        case Family::PiecewiseConstant: {
            if (!j.contains("breaks") || !j.contains("values")) {
                throw std::invalid_argument("accumulator: piecewise needs breaks and values");
            }
            return AccumulatorSpec::piecewise_constant(j["breaks"].get<std::vector<double>>(),
                                                       j["values"].get<std::vector<double>>());
        }
    }
    throw std::invalid_argument("accumulator: unsupported kind");
}

}  // namespace star::accum
