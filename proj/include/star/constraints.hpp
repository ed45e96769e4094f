#pragma once
// Structural constraints on the rejection set and the peel candidates that
// keep a set inside them.

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace star {

using Id = std::int32_t;
// Sorted ascending, no duplicates.
using IdSet = std::vector<Id>;

}  // namespace star

namespace star::constraints {

enum class Kind { None, Convex2d, AxisBox, Tree, DagStrong, DagWeak };

std::string to_string(Kind k);
Kind kind_from_string(const std::string& s);

class StructureError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

inline constexpr double kDefaultDelta = 0.02;
inline constexpr int kDefaultAngles = 100;

class ConstraintSpec {
public:
    static ConstraintSpec none(std::size_t n);
    static ConstraintSpec convex2d(std::vector<double> xs, std::vector<double> ys,
                                   double delta = kDefaultDelta, int angles = kDefaultAngles);
    // coords is row-major n x dim.
    static ConstraintSpec axis_box(std::size_t n, std::size_t dim, std::vector<double> coords,
                                   double delta = kDefaultDelta);
    // parent[i] == -1 marks the root.
    static ConstraintSpec tree(std::vector<Id> parent);
    // edges are (parent, child) arcs.
    static ConstraintSpec dag(std::size_t n, const std::vector<std::pair<Id, Id>>& edges,
                              bool strong);

    Kind kind() const { return kind_; }
    std::size_t size() const { return n_; }
    double delta() const { return delta_; }
    int angles() const { return angles_; }
    std::size_t dim() const { return dim_; }

    std::span<const double> xs() const { return xs_; }
    std::span<const double> ys() const { return ys_; }
    // row-major n x dim (axis box)
    std::span<const double> coords() const { return coords_; }

    std::span<const Id> children(Id v) const;
    std::span<const Id> parents(Id v) const;
    // tree: parent pointer (-1 at the root)
    Id parent_of(Id v) const { return tree_parent_.empty() ? -1 : tree_parent_[v]; }
    const std::vector<Id>& roots() const { return roots_; }
    // (parent, child) arcs of a tree or DAG, sorted.
    std::vector<std::pair<Id, Id>> edges() const;

private:
    ConstraintSpec() = default;
    void build_adjacency(const std::vector<std::pair<Id, Id>>& edges);

    Kind kind_ = Kind::None;
    std::size_t n_ = 0;
    double delta_ = kDefaultDelta;
    int angles_ = kDefaultAngles;
    std::size_t dim_ = 0;
    std::vector<double> xs_;
    std::vector<double> ys_;
    std::vector<double> coords_;
    std::vector<Id> tree_parent_;
    // CSR adjacency
    std::vector<std::size_t> child_offsets_;
    std::vector<Id> child_ids_;
    std::vector<std::size_t> parent_offsets_;
    std::vector<Id> parent_ids_;
    std::vector<Id> roots_;
};

// Candidate sets stored flat: set k is ids[offsets[k] .. offsets[k+1]).
class CandidateList {
public:
    CandidateList() : offsets_{0} {}
    std::size_t size() const { return offsets_.size() - 1; }
    bool empty() const { return size() == 0; }
    std::span<const Id> operator[](std::size_t k) const {
        return {ids_.data() + offsets_[k], offsets_[k + 1] - offsets_[k]};
    }
    IdSet set(std::size_t k) const {
        auto s = (*this)[k];
        return {s.begin(), s.end()};
    }
    void push_back(std::span<const Id> set) {
        ids_.insert(ids_.end(), set.begin(), set.end());
        offsets_.push_back(ids_.size());
    }
    void push_singleton(Id v) {
        ids_.push_back(v);
        offsets_.push_back(ids_.size());
    }
    void reserve(std::size_t sets, std::size_t ids) {
        offsets_.reserve(sets + 1);
        ids_.reserve(ids);
    }
    std::vector<IdSet> to_sets() const {
        std::vector<IdSet> out;
        out.reserve(size());
        for (std::size_t k = 0; k < size(); ++k) out.push_back(set(k));
        return out;
    }

private:
    std::vector<Id> ids_;
    std::vector<std::size_t> offsets_;
};

// Byte-per-id membership flags.
using Membership = std::vector<char>;
Membership membership_of(std::size_t n, std::span<const Id> set);

bool in_constraint(const ConstraintSpec& c, std::span<const Id> set);
bool in_constraint(const ConstraintSpec& c, const Membership& member);

// Candidate peel sets for the current set; each candidate is sorted.
// With check_member false, tree and DAG candidates are produced for sets
// outside K as well (the engine allows temporary excursions).
CandidateList candidates(const ConstraintSpec& c, std::span<const Id> set,
                              bool check_member = true);
CandidateList candidates_none(const ConstraintSpec& c, std::span<const Id> set);
CandidateList candidates_convex(const ConstraintSpec& c, std::span<const Id> set);
CandidateList candidates_box(const ConstraintSpec& c, std::span<const Id> set);
CandidateList candidates_tree(const ConstraintSpec& c, std::span<const Id> set,
                                   bool check_member = true);
CandidateList candidates_dag(const ConstraintSpec& c, std::span<const Id> set,
                                  bool check_member = true);

// Peel size for a set of the given size: ceil(delta * size), at least one.
std::size_t peel_count(double delta, std::size_t size);

// Direction (cos, sin) for probe k of `angles`; exact on the axes.
std::pair<double, double> probe_direction(int k, int angles);

// Geometry helpers shared with tests.
namespace geometry {
struct Point {
    double x;
    double y;
};
// Counter-clockwise hull without collinear vertices.
std::vector<Point> convex_hull(std::vector<Point> pts);
// True when q lies strictly inside the hull (distance to every edge > tol).
bool strictly_inside(const std::vector<Point>& hull, Point q, double tol);
}  // namespace geometry

}  // namespace star::constraints
