#pragma once
// The oracle protocol: a session holds the true p-values and the shrinking
// candidate set; the analyst sees only AnalystView snapshots.

#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "star/accum.hpp"
#include "star/constraints.hpp"

namespace star::engine {

using constraints::ConstraintSpec;
using accum::AccumulatorSpec;

// Bad inputs to session creation (HTTP 400, CLI exit 2).
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A peel set that is empty or not a subset of the current set (HTTP 422).
class PeelError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Mutation after the stopping time, or a result requested before it (HTTP 409).
class HaltedError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

struct Dataset {
    std::size_t n = 0;
    std::size_t dim = 0;
    std::vector<double> covariates;  // row-major n x dim
    std::vector<double> p;

    std::span<const double> covariate(Id i) const { return {covariates.data() + i * dim, dim}; }
};

// Throws ValidationError naming the first offending row.
void validate(const Dataset& data);

struct HistoryEntry {
    std::size_t step = 0;
    IdSet removed;
    double fdp_hat = 0.0;
    bool in_constraint = true;

    friend bool operator==(const HistoryEntry&, const HistoryEntry&) = default;
};

// Immutable snapshot of the peel history, shared in fixed-size chunks.
class HistoryLog {
public:
    static constexpr std::size_t kChunk = 256;

    std::size_t size() const { return size_; }
    const HistoryEntry& operator[](std::size_t i) const { return (*chunks_[i / kChunk])[i % kChunk]; }
    const HistoryEntry& back() const { return (*this)[size_ - 1]; }
    std::vector<HistoryEntry> to_vector() const;

private:
    friend class Session;
    std::vector<std::shared_ptr<const std::vector<HistoryEntry>>> chunks_;
    std::size_t size_ = 0;
};

struct AnalystView {
    std::size_t n = 0;
    std::size_t step = 0;
    double alpha = 0.0;
    double sum_h = 0.0;
    double fdp_hat = 0.0;
    bool in_constraint = true;
    bool halted = false;
    // Every p-value is revealed (halted session with disclosure on).
    bool disclosed = false;
    IdSet current;
    // Dense, indexed by id: g for ids in the current set, NaN elsewhere.
    std::vector<double> masked_g;
    // Dense, indexed by id: p for revealed ids, NaN for masked ones.
    std::vector<double> revealed_p;
    constraints::CandidateList candidates;
    HistoryLog history;
    std::shared_ptr<const Dataset> public_data;  // covariates only; p is empty
    std::shared_ptr<const AccumulatorSpec> spec;
    std::shared_ptr<const ConstraintSpec> constraint;

    bool is_masked(Id i) const { return masked_g[i] == masked_g[i]; }
    bool is_revealed(Id i) const { return revealed_p[i] == revealed_p[i]; }
};

struct StopStatus {
    bool halted = false;
    IdSet rejection;
};

class Session {
public:
    Session(Dataset data, AccumulatorSpec spec, ConstraintSpec constraint, double alpha,
            std::uint64_t seed, bool disclose_on_halt = true);

    // Immutable snapshot of the current filtration; cached until the next peel.
    std::shared_ptr<const AnalystView> view() const;
    void peel(std::span<const Id> remove);
    StopStatus check_stop() const;
    // R_tau; throws HaltedError before the stopping time.
    const IdSet& rejection() const;

    std::size_t n() const { return data_->n; }
    std::size_t step() const { return steps_; }
    bool halted() const { return halted_; }
    bool in_constraint() const { return in_constraint_; }
    double alpha() const { return alpha_; }
    double sum_h() const { return sum_h_; }
    double fdp_hat() const { return fdp_hat_; }
    std::uint64_t seed() const { return seed_; }
    bool disclose_on_halt() const { return disclose_; }
    const IdSet& current() const { return current_; }
    HistoryLog history() const;
    const Dataset& data() const { return *data_; }
    const AccumulatorSpec& spec() const { return *spec_; }
    const ConstraintSpec& constraint() const { return *constraint_; }

private:
    void update_status();
    void record(IdSet removed);

    std::shared_ptr<const Dataset> data_;
    std::shared_ptr<const Dataset> public_data_;
    std::shared_ptr<const AccumulatorSpec> spec_;
    std::shared_ptr<const ConstraintSpec> constraint_;
    double alpha_;
    std::uint64_t seed_;
    bool disclose_;
    std::vector<double> g_;
    std::vector<double> h_;
    constraints::Membership member_;
    IdSet current_;
    double sum_h_ = 0.0;
    double fdp_hat_ = 0.0;
    bool in_constraint_ = true;
    bool halted_ = false;
    std::size_t steps_ = 0;
    std::vector<std::shared_ptr<const std::vector<HistoryEntry>>> full_chunks_;
    std::vector<HistoryEntry> tail_;
    mutable std::shared_ptr<const AnalystView> cached_;
};

// An update rule sees only the analyst view and returns the set to peel.
class UpdateRule {
public:
    virtual ~UpdateRule() = default;
    virtual std::string name() const = 0;
    // Throws ValidationError when the rule cannot work with this constraint.
    virtual void check_compatible(const ConstraintSpec& c) const { (void)c; }
    virtual IdSet choose(const AnalystView& view) = 0;
};

// Peels until halted or max_steps peels were made; returns the number of peels.
std::size_t run_auto(Session& session, UpdateRule& rule,
                     std::size_t max_steps = std::numeric_limits<std::size_t>::max());

// JSON wire forms (schema version 1).
inline constexpr int kSchemaVersion = 1;

nlohmann::json view_to_json(const AnalystView& view);
nlohmann::json constraint_to_json(const ConstraintSpec& c);
// Coordinates for convex2d and axisbox constraints come from the dataset.
ConstraintSpec constraint_from_json(const nlohmann::json& j, const Dataset& data);

// Full snapshot; the "oracle" section holding p-values is dropped when
// include_oracle is false.
nlohmann::json snapshot_to_json(const Session& s, bool include_oracle);
// Rebuilds a session from a snapshot with an oracle section by replaying
// its recorded peels.
Session session_from_snapshot(const nlohmann::json& j);

}  // namespace star::engine
