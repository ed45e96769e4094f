#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>

#include "star/service.hpp"

namespace star::service {
namespace {

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    for (auto& f : out) {
        const auto b = f.find_first_not_of(" \t");
        const auto e = f.find_last_not_of(" \t");
        f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
    }
    return out;
}

bool skip(const std::string& line) {
    const auto b = line.find_first_not_of(" \t\r");
    return b == std::string::npos || line[b] == '#';
}

double parse_double(const std::string& s, const std::string& where) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ValidationError(where + ": '" + s + "' is not a number");
    }
}

long long parse_int(const std::string& s, const std::string& where) {
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
        throw ValidationError(where + ": '" + s + "' is not an integer id");
    return v;
}

std::ifstream open(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError(path.string() + ": cannot open");
    return in;
}

}  // namespace

Dataset read_dataset_csv(std::istream& in) {
    std::string line;
    std::size_t lineno = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++lineno;
        if (skip(line)) continue;
        header = split(line);
        break;
    }
    if (header.size() < 2 || header.front() != "id" || header.back() != "p")
        throw ValidationError("dataset: header must be id,x1..xd,p");
    const std::size_t dim = header.size() - 2;
    for (std::size_t k = 0; k < dim; ++k)
        if (header[k + 1] != "x" + std::to_string(k + 1))
            throw ValidationError("dataset: header column " + std::to_string(k + 2) + " must be x" +
                                  std::to_string(k + 1));
    std::vector<std::pair<long long, std::vector<double>>> rows;
    while (std::getline(in, line)) {
        ++lineno;
        if (skip(line)) continue;
        const std::string where = "dataset: line " + std::to_string(lineno);
        auto f = split(line);
        if (f.size() != header.size())
            throw ValidationError(where + ": expected " + std::to_string(header.size()) + " fields");
        std::vector<double> vals;
        for (std::size_t k = 1; k < f.size(); ++k) vals.push_back(parse_double(f[k], where));
        rows.emplace_back(parse_int(f[0], where), std::move(vals));
    }
    Dataset d;
    d.n = rows.size();
    d.dim = dim;
    d.covariates.assign(d.n * dim, 0.0);
    d.p.assign(d.n, 0.0);
    std::vector<char> seen(d.n, 0);
    for (const auto& [id, vals] : rows) {
        if (id < 0 || static_cast<std::size_t>(id) >= d.n)
            throw ValidationError("dataset: id " + std::to_string(id) + " is outside 0.." +
                                  std::to_string(d.n - 1));
        if (seen[id]) throw ValidationError("dataset: id " + std::to_string(id) + " appears twice");
        seen[id] = 1;
        for (std::size_t k = 0; k < dim; ++k) d.covariates[id * dim + k] = vals[k];
        d.p[id] = vals[dim];
    }
    engine::validate(d);
    return d;
}

Dataset read_dataset_csv(const std::filesystem::path& path) {
    auto in = open(path);
    return read_dataset_csv(in);
}

void write_dataset_csv(std::ostream& out, const Dataset& data) {
    out << "id";
    for (std::size_t k = 0; k < data.dim; ++k) out << ",x" << k + 1;
    out << ",p\n";
    out.precision(17);
    for (std::size_t i = 0; i < data.n; ++i) {
        out << i;
        for (double x : data.covariate(static_cast<Id>(i))) out << ',' << x;
        out << ',' << data.p[i] << '\n';
    }
}

StructureRows read_structure_csv(std::istream& in) {
    std::string line;
    std::size_t lineno = 0;
    bool header = false;
    StructureRows s;
    long long max_id = -1;
    while (std::getline(in, line)) {
        ++lineno;
        if (skip(line)) continue;
        auto f = split(line);
        if (!header) {
            if (f.size() != 2 || f[0] != "child" || f[1] != "parent")
                throw ValidationError("structure: header must be child,parent");
            header = true;
            continue;
        }
        const std::string where = "structure: line " + std::to_string(lineno);
        if (f.size() != 2) throw ValidationError(where + ": expected 2 fields");
        const long long child = parse_int(f[0], where);
        if (child < 0) throw ValidationError(where + ": negative id");
        max_id = std::max(max_id, child);
        if (f[1].empty()) {
            s.roots.push_back(static_cast<Id>(child));
            continue;
        }
        const long long parent = parse_int(f[1], where);
        if (parent < 0) throw ValidationError(where + ": negative id");
        max_id = std::max(max_id, parent);
        s.edges.emplace_back(static_cast<Id>(parent), static_cast<Id>(child));
    }
    if (!header) throw ValidationError("structure: missing header child,parent");
    s.n = static_cast<std::size_t>(max_id + 1);
    return s;
}

StructureRows read_structure_csv(const std::filesystem::path& path) {
    auto in = open(path);
    return read_structure_csv(in);
}

void write_structure_csv(std::ostream& out, const ConstraintSpec& c) {
    out << "child,parent\n";
    for (std::size_t v = 0; v < c.size(); ++v) {
        const auto parents = c.parents(static_cast<Id>(v));
        if (parents.empty()) out << v << ",\n";
        for (Id p : parents) out << v << ',' << p << '\n';
    }
}

json constraint_json(const std::string& kind, const std::optional<StructureRows>& structure,
                     std::size_t n, double delta, int angles) {
    if (kind == "none") return {{"kind", "none"}};
    if (kind == "convex2d") return {{"kind", kind}, {"delta", delta}, {"angles", angles}};
    if (kind == "axisbox") return {{"kind", kind}, {"delta", delta}};
    if (kind != "tree" && kind != "dag_strong" && kind != "dag_weak")
        throw ValidationError("constraint: unknown kind '" + kind + "'");
    if (!structure) throw ValidationError("constraint: kind " + kind + " needs a structure file");
    if (structure->n > n)
        throw ValidationError("structure: id " + std::to_string(structure->n - 1) +
                              " is outside the dataset");
    if (kind == "tree") {
        json parent = json::array();
        std::vector<long long> p(n, -1);
        for (const auto& [par, child] : structure->edges) {
            if (p[child] >= 0) throw ValidationError("structure: node " + std::to_string(child) + " has two parents");
            p[child] = par;
        }
        for (long long v : p) {
            if (v < 0)
                parent.push_back(nullptr);
            else
                parent.push_back(v);
        }
        return {{"kind", kind}, {"parent", std::move(parent)}};
    }
    json edges = json::array();
    for (const auto& [par, child] : structure->edges) edges.push_back({par, child});
    return {{"kind", kind}, {"edges", std::move(edges)}};
}

}  // namespace star::service
