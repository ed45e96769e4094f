#include <algorithm>
#include <cmath>
#include <limits>

#include "star/engine.hpp"

namespace star::engine {

void validate(const Dataset& data) {
    if (data.n < 1) throw ValidationError("dataset: at least one hypothesis is required");
    if (data.p.size() != data.n)
        throw ValidationError("dataset: expected " + std::to_string(data.n) + " p-values, got " +
                              std::to_string(data.p.size()));
    if (data.covariates.size() != data.n * data.dim)
        throw ValidationError("dataset: covariate array has wrong size");
    for (std::size_t i = 0; i < data.n; ++i) {
        const double p = data.p[i];
        if (!(p >= 0.0 && p <= 1.0))
            throw ValidationError("dataset: row " + std::to_string(i) + ": p-value " +
                                  std::to_string(p) + " is outside [0,1]");
        for (std::size_t j = 0; j < data.dim; ++j)
            if (!std::isfinite(data.covariates[i * data.dim + j]))
                throw ValidationError("dataset: row " + std::to_string(i) + ": covariate x" +
                                      std::to_string(j + 1) + " is not finite");
    }
}

Session::Session(Dataset data, AccumulatorSpec spec, ConstraintSpec constraint, double alpha,
                 std::uint64_t seed, bool disclose_on_halt)
    : alpha_(alpha), seed_(seed), disclose_(disclose_on_halt) {
    validate(data);
    if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0,1)");
    if (constraint.size() != data.n)
        throw ValidationError("constraint: structure covers " + std::to_string(constraint.size()) +
                              " ids but the dataset has " + std::to_string(data.n));
    const std::size_t n = data.n;
    g_.resize(n);
    h_.resize(n);
    spec.mask_all(data.p, g_, h_);
    auto pub = std::make_shared<Dataset>();
    pub->n = n;
    pub->dim = data.dim;
    pub->covariates = data.covariates;
    public_data_ = std::move(pub);
    data_ = std::make_shared<const Dataset>(std::move(data));
    spec_ = std::make_shared<const AccumulatorSpec>(std::move(spec));
    constraint_ = std::make_shared<const ConstraintSpec>(std::move(constraint));
    member_.assign(n, 1);
    current_.resize(n);
    for (std::size_t i = 0; i < n; ++i) current_[i] = static_cast<Id>(i);
    sum_h_ = 0.0;
    for (double v : h_) sum_h_ += v;
    update_status();
    record({});
}

void Session::update_status() {
    in_constraint_ = constraints::in_constraint(*constraint_, member_);
    fdp_hat_ = spec_->fdp_hat(sum_h_, current_.size());
    halted_ = current_.empty() || (fdp_hat_ <= alpha_ && in_constraint_);
    cached_.reset();
}

void Session::record(IdSet removed) {
    tail_.push_back({steps_, std::move(removed), fdp_hat_, in_constraint_});
    if (tail_.size() == HistoryLog::kChunk) {
        full_chunks_.push_back(std::make_shared<const std::vector<HistoryEntry>>(std::move(tail_)));
        tail_.clear();
    }
}

HistoryLog Session::history() const {
    HistoryLog log;
    log.chunks_ = full_chunks_;
    if (!tail_.empty()) log.chunks_.push_back(std::make_shared<const std::vector<HistoryEntry>>(tail_));
    log.size_ = steps_ + 1;
    return log;
}

std::vector<HistoryEntry> HistoryLog::to_vector() const {
    std::vector<HistoryEntry> out;
    out.reserve(size_);
    for (const auto& chunk : chunks_) out.insert(out.end(), chunk->begin(), chunk->end());
    return out;
}

void Session::peel(std::span<const Id> remove) {
    if (halted_) throw HaltedError("session has halted; no further peels are accepted");
    if (remove.empty()) throw PeelError("peel set is empty");
    IdSet ids(remove.begin(), remove.end());
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    for (Id v : ids) {
        if (v < 0 || static_cast<std::size_t>(v) >= n())
            throw PeelError("id " + std::to_string(v) + " is out of range");
        if (!member_[v]) throw PeelError("id " + std::to_string(v) + " is not in the current set");
    }
    for (Id v : ids) {
        member_[v] = 0;
        sum_h_ -= h_[v];
    }
    std::erase_if(current_, [&](Id v) { return !member_[v]; });
    if (current_.empty()) sum_h_ = 0.0;
    ++steps_;
    update_status();
    record(std::move(ids));
}

StopStatus Session::check_stop() const {
    StopStatus st;
    st.halted = halted_;
    if (halted_) st.rejection = current_;
    return st;
}

const IdSet& Session::rejection() const {
    if (!halted_) throw HaltedError("session has not halted");
    return current_;
}

std::shared_ptr<const AnalystView> Session::view() const {
    if (cached_) return cached_;
    const std::size_t n = this->n();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    auto v = std::make_shared<AnalystView>();
    v->n = n;
    v->step = step();
    v->alpha = alpha_;
    v->sum_h = sum_h_;
    v->fdp_hat = fdp_hat();
    v->in_constraint = in_constraint_;
    v->halted = halted_;
    v->disclosed = halted_ && disclose_;
    v->current = current_;
    v->masked_g.assign(n, nan);
    v->revealed_p.assign(n, nan);
    for (std::size_t i = 0; i < n; ++i) {
        if (member_[i])
            v->masked_g[i] = g_[i];
        if (!member_[i] || v->disclosed) v->revealed_p[i] = data_->p[i];
    }
    if (!halted_) v->candidates = constraints::candidates(*constraint_, current_, false);
    v->history = history();
    v->public_data = public_data_;
    v->spec = spec_;
    v->constraint = constraint_;
    cached_ = std::move(v);
    return cached_;
}

std::size_t run_auto(Session& session, UpdateRule& rule, std::size_t max_steps) {
    rule.check_compatible(session.constraint());
    std::size_t steps = 0;
    while (!session.halted() && steps < max_steps) {
        const auto view = session.view();
        const IdSet choice = rule.choose(*view);
        session.peel(choice);
        ++steps;
    }
    return steps;
}

}  // namespace star::engine
