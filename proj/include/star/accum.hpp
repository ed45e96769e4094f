#pragma once
// Accumulation functions h, their integrals H, the reflection s and the
// masking function g = min(p, s(p)).
//
// Every family is stored in its truncated, renormalized form
//   h(p) = min(h_raw(p), cap) / norm,   norm = int_0^1 min(h_raw, cap) dp,
// so that h integrates to one on [0, 1]. H(p) = int_0^p (h(x) - 1) dx is
// non-positive, vanishes at both endpoints and is decreasing up to the fixed
// point of s and increasing after it. s maps each branch onto the other.

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace star::accum {

enum class Family { SeqStep, ForwardStop, HingeExp, PiecewiseConstant };

std::string to_string(Family f);
Family family_from_string(const std::string& s);

// Raised when a root-find fails to bracket or converge.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct PreimagePair {
    double low;
    double high;
};

class AccumulatorSpec {
public:
    // h(p) = 1/(1-p*) 1{p > p*}.
    static AccumulatorSpec seqstep(double pstar);
    // h(p) = -log(1-p) truncated at cap (default -log 0.01).
    static AccumulatorSpec forward_stop(double cap = default_forward_stop_cap());
    // h(p) = log((1-p*)/(1-p))/(1-p*) 1{p >= p*} truncated at cap
    // (default -log(0.01)/(1-p*)).
    static AccumulatorSpec hinge_exp(double pstar);
    static AccumulatorSpec hinge_exp(double pstar, double cap);
    // Non-decreasing step function: values[j] on [breaks[j], breaks[j+1]).
    // breaks must start at 0 and end at 1; values are renormalized.
    static AccumulatorSpec piecewise_constant(std::vector<double> breaks,
                                              std::vector<double> values);

    static double default_forward_stop_cap();

    Family family() const { return family_; }
    // Family parameter p* (NaN for ForwardStop and piecewise families).
    double pstar() const { return pstar_; }
    double cap() const { return cap_; }
    double norm() const { return norm_; }
    // Fixed point of s; masked values never exceed it.
    double fixed_point() const { return 0.5 * (flat_lo_ + flat_hi_); }
    // Closure of {h == 1}; a single point unless h is flat at one.
    double flat_lo() const { return flat_lo_; }
    double flat_hi() const { return flat_hi_; }

    double h(double p) const;
    double H(double p) const;
    double s(double p) const;
    double mask(double p) const;
    PreimagePair unmask_pair(double q) const;
    // h(1): the largest value of the renormalized function.
    double h_max() const { return h_max_; }
    double fdp_hat(double sum_h, std::size_t set_size) const;
    // One-sided derivative s'(p) = (h(p) - 1)/(h(s(p)) - 1); -1 on flat parts.
    double s_derivative(double p) const;

    const std::vector<double>& breaks() const { return breaks_; }
    const std::vector<double>& values() const { return values_; }

    // Batch g and h over a span of p-values.
    void mask_all(std::span<const double> p, std::span<double> g, std::span<double> h) const;

    friend bool operator==(const AccumulatorSpec& a, const AccumulatorSpec& b);

private:
    AccumulatorSpec() = default;
    void finish();
    double raw_integral(double p) const;  // int_0^p min(h_raw, cap)
    double h_raw_capped(double p) const;
    double solve_on_branch(double target, double lo, double hi, bool increasing) const;

    Family family_ = Family::SeqStep;
    double pstar_ = 0.5;
    double cap_ = 0.0;
    double norm_ = 1.0;
    double cap_point_ = 1.0;  // where h_raw reaches cap
    double flat_lo_ = 0.5;
    double flat_hi_ = 0.5;
    double h_max_ = 2.0;
    std::vector<double> breaks_;
    std::vector<double> values_;
    std::vector<double> cumulative_;  // raw integral at each break
};

// Knockoff one-bit p-value: p = 1/2 when W > 0, else 1; magnitude = |W|.
struct OneBitPValue {
    double p;
    double magnitude;
};

OneBitPValue onebit_from_knockoff(double w);

void to_json(nlohmann::json& j, const AccumulatorSpec& spec);
AccumulatorSpec accumulator_from_json(const nlohmann::json& j);

}  // namespace star::accum
