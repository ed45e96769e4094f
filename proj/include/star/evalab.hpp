#pragma once
// Baselines, simulation generators, Monte Carlo harness, the unstructured
// threshold comparison and wavelet quadtree denoising.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "star/engine.hpp"
#include "star/scores.hpp"

namespace star::evalab {

using Rng = std::mt19937_64;
using engine::AccumulatorSpec;
using engine::ConstraintSpec;
using engine::Dataset;

// Independent stream seed for replicate `index`.
std::uint64_t replicate_seed(std::uint64_t seed, std::uint64_t index);

// ---- baselines --------------------------------------------------------------------

IdSet bh(std::span<const double> p, double alpha);
// (1 + #{p > lam}) / (n (1 - lam))
double storey_pi0(std::span<const double> p, double lam = 0.5);
IdSet storey_bh(std::span<const double> p, double alpha, double lam = 0.5);
// Largest k with (h(1) + sum_{i<=k} h(p_i)) / (1 + k) <= alpha, else 0.
std::size_t fixed_order_accumulation(std::span<const double> p_in_order,
                                     const AccumulatorSpec& spec, double alpha);

struct FdpPower {
    double fdp;
    double power;
    std::size_t rejections = 0;
};
FdpPower fdp_power(std::span<const Id> rejected, const std::vector<char>& is_null);

// ---- generators -------------------------------------------------------------------

enum class Scenario {
    ConvexCircle,
    ConvexEllipse,
    ConvexPolygon,
    TreeBfs,
    TreeDfs,
    DagShallow,
    DagDeep,
    DagTriangular,
    Unstructured
};
std::string to_string(Scenario s);
Scenario scenario_from_string(const std::string& s);

struct ExperimentConfig {
    Scenario scenario = Scenario::ConvexCircle;
    int tree_case = 1;
    std::vector<double> alpha_grid;
    int replicates = 100;
    double rho = 0.0;
    std::uint64_t seed = 1;
    std::vector<std::string> methods{"star_canonical", "bh"};
    double mu = 2.0;
    std::size_t n = 1000;  // unstructured only
    double pi1 = 0.2;      // unstructured only
    AccumulatorSpec accum = AccumulatorSpec::seqstep(0.5);
    scores::ScoreConfig score;
    double delta = constraints::kDefaultDelta;
    int angles = constraints::kDefaultAngles;
    unsigned threads = 0;  // 0 = hardware concurrency

    static std::vector<double> default_alpha_grid();
};

ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& c);

// Covariates, structure and signal means; identical across replicates.
struct Layout {
    Dataset data;  // p left empty
    ConstraintSpec constraint = ConstraintSpec::none(0);
    std::vector<char> is_null;
    std::vector<double> mu;
    // Kept-first ordering for the fixed-order accumulation baseline.
    std::vector<Id> fixed_order;
};
Layout make_layout(const ExperimentConfig& cfg);

struct Instance {
    Layout layout;
    std::vector<double> z;
};
// Draws z ~ N(mu, Sigma_rho) and sets p = 1 - Phi(z).
Instance gen_dataset(const ExperimentConfig& cfg, std::uint64_t seed);
void draw_pvalues(const Layout& layout, double rho, Rng& rng, Dataset& out, std::vector<double>& z);

// Equi-correlated normals: unit variances, pairwise correlation rho.
std::vector<double> gen_correlated_z(std::span<const double> mu, double rho, Rng& rng);

// Tree helpers for the heap-indexed binary tree.
std::vector<Id> heap_tree_parents(std::size_t n);
std::vector<Id> preorder(std::span<const Id> parent);

// ---- Monte Carlo harness ----------------------------------------------------------

struct MethodSummary {
    std::string method;
    double alpha;
    double fdr;
    double fdr_se;
    double power;
    double power_se;
    double mean_rejections;
    int replicates;
};

struct ExperimentResult {
    ExperimentConfig config;
    std::vector<MethodSummary> rows;

    const MethodSummary& at(const std::string& method, double alpha) const;
};

// Per-replicate FDP/power of one method across the alpha grid.
std::vector<FdpPower> run_method(const std::string& method, const ExperimentConfig& cfg,
                                 const Layout& layout, const Dataset& data);

ExperimentResult run_experiment(const ExperimentConfig& cfg);
void write_results_csv(std::ostream& out, const ExperimentResult& r);

// Rejection set at level alpha from a finished STAR trajectory: the first
// step with fdp_hat <= alpha inside K (or the empty set).
IdSet rejection_at(const engine::HistoryLog& history, std::size_t n, double alpha);

// ---- unstructured threshold comparison ---------------------------------------------

struct ThresholdRelation {
    double t_bh = 0.0;    // largest p rejected by Storey-BH
    double t_star = 0.0;  // largest rejected p at or below p*
    double lhs = 0.0;     // F1(T_BH) / T_BH
    double rhs = 0.0;     // p* F1(T_S) / T_S
    double ratio = 0.0;   // lhs / rhs
    std::size_t rejected_bh = 0;
    std::size_t rejected_star = 0;
    std::size_t star_above_pstar = 0;
    std::size_t bh_above_pstar = 0;
    double sym_diff = 0.0;  // |A xor B| / |A u B|
    bool skipped = false;
    int attempts = 0;
};

// Two-group model with pi0 nulls and z ~ N(mu_alt, 1) alternatives, STAR-SeqStep
// with the canonical unconstrained rule versus Storey-BH on the same draw.
ThresholdRelation threshold_relation_check(double pi0, double mu_alt, double pstar, std::size_t n,
                                           double alpha, std::uint64_t seed);

// ---- wavelets ------------------------------------------------------------------------

struct Image {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> px;  // row-major
};

// Mallat layout of a full-depth orthonormal 2-D Haar transform. At scale b
// the detail blocks are LH = rows [0,b) x cols [b,2b), HL = rows [b,2b) x
// cols [0,b), HH = rows [b,2b) x cols [b,2b); (0,0) is the scaling coefficient.
struct WaveletDataset {
    std::size_t side = 0;
    int levels = 0;
    std::vector<double> coeffs;
};

WaveletDataset haar_dwt2(const Image& img);
Image haar_idwt2(const WaveletDataset& ws);

// Sub-band of coefficient index (row * side + col): -1 for the scaling
// coefficient, 0 = LH, 1 = HL, 2 = HH.
int subband(std::size_t side, std::size_t row, std::size_t col);

struct WaveletTests {
    std::array<double, 3> sigma_hat{};
    bool sigma_floored = false;
    std::vector<double> p;      // per coefficient; the scaling coefficient gets 0
    std::vector<Id> parent;     // quadtree; -1 at the scaling coefficient
};

// sigma_w = median |d| over the finest block of sub-band w, divided by 0.6745.
WaveletTests wavelet_pvalues(const WaveletDataset& ws, bool two_sided);

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

// Keeps the selected coefficients (and the scaling coefficient) and inverts.
Image reconstruct(const WaveletDataset& ws, std::span<const Id> keep);
// Universal threshold sqrt(2 sigma_w^2 log N); returns the kept set and,
// for soft mode, the shrunken coefficients.
struct ThresholdResult {
    IdSet selected;
    WaveletDataset shrunk;
};
ThresholdResult threshold_baseline(const WaveletDataset& ws, const WaveletTests& tests, bool soft);

// 10 log10(var(original) / mean((recon - original)^2)); +inf for exact recon.
double snr_db(const Image& original, const Image& recon);
// total / selected; +inf when nothing is selected.
double compression_ratio(std::size_t total, std::size_t selected);

Image synthetic_image(std::size_t side);
Image add_noise(const Image& img, double snr_db, Rng& rng);

struct DenoiseMethod {
    std::string name;
    double snr = 0.0;
    double cr = 0.0;
    std::size_t selected = 0;
    Image recon;
};
struct DenoiseReport {
    double input_snr = 0.0;
    std::array<double, 3> sigma_hat{};
    std::vector<DenoiseMethod> methods;
    double roundtrip_error = 0.0;
};
// Runs STAR on the quadtree, BH, and hard/soft thresholding on `noisy`.
DenoiseReport denoise(const Image& original, const Image& noisy, double alpha_star,
                      double alpha_bh, bool two_sided);

// Portable graymap (P2/P5) input and P5 output.
Image read_pgm(const std::string& path);
// `comment` lines are written into the header.
void write_pgm(const std::string& path, const Image& img, const std::string& comment = {});

// ---- randomized p-values ------------------------------------------------------------

class EmpiricalDistribution {
public:
    explicit EmpiricalDistribution(std::vector<double> sample);
    double cdf(double x) const;       // P(Y <= x)
    double cdf_left(double x) const;  // P(Y < x)
    std::size_t size() const { return sorted_.size(); }

private:
    std::vector<double> sorted_;
};

// p = 1 - F0((y - B)^-) - U * P(Y = y - B) with U the given uniform draw.
double randomized_pvalue(double y, const EmpiricalDistribution& f0, double offset, double u);

// Kolmogorov-Smirnov distance of a sample to Uniform(0,1).
double ks_uniform(std::vector<double> sample);

}  // namespace star::evalab
