#pragma once
// The oracle as a service: wire codec, CSV inputs, the session store and the
// HTTP front end.

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "json.hpp"
#include "star/engine.hpp"
#include "star/scores.hpp"

namespace star::service {

using engine::AccumulatorSpec;
using engine::ConstraintSpec;
using engine::Dataset;
using engine::ValidationError;
using nlohmann::json;

// ---- codec ------------------------------------------------------------------------

struct CreateRequest {
    Dataset data;
    AccumulatorSpec accum = AccumulatorSpec::seqstep(0.5);
    ConstraintSpec constraint = ConstraintSpec::none(0);
    double alpha = 0.1;
    std::uint64_t seed = 0;
    scores::ScoreConfig score;
    bool disclose_on_halt = true;
};

// Body of POST /sessions:
//   {"v":1, "data":{"covariates":[[..]..], "p":[..]}, "accum":{..}, "constraint":{..},
//    "alpha":x, "seed":n, "score":{..}, "disclose_on_halt":bool}
// Throws ValidationError with a field path.
CreateRequest decode_create(const json& body);
json encode_create(const Dataset& data, const json& accum, const json& constraint, double alpha,
                   std::uint64_t seed, const json& score, bool disclose_on_halt = true);

IdSet decode_peel(const json& body);
std::size_t decode_autostep(const json& body);

json error_body(int status, const std::string& message);
json result_body(const engine::Session& s);

// ---- CSV inputs ---------------------------------------------------------------------

// Header id,x1..xd,p; ids must be a permutation of 0..n-1.
Dataset read_dataset_csv(std::istream& in);
Dataset read_dataset_csv(const std::filesystem::path& path);
void write_dataset_csv(std::ostream& out, const Dataset& data);

// Header child,parent; an empty parent marks a root. DAG children repeat
// once per parent.
struct StructureRows {
    std::size_t n = 0;
    std::vector<std::pair<Id, Id>> edges;  // (parent, child)
    std::vector<Id> roots;
};
StructureRows read_structure_csv(std::istream& in);
StructureRows read_structure_csv(const std::filesystem::path& path);
void write_structure_csv(std::ostream& out, const ConstraintSpec& c);

// Constraint JSON for a kind read from the command line plus an optional
// structure file.
json constraint_json(const std::string& kind, const std::optional<StructureRows>& structure,
                     std::size_t n, double delta, int angles);

// ---- store -----------------------------------------------------------------------------

struct StoreOptions {
    // Snapshots written after every mutation when set.
    std::optional<std::filesystem::path> snapshot_dir;
};

class SessionStore {
public:
    explicit SessionStore(StoreOptions opts = {});

    std::string create(CreateRequest req);
    // Serialized view served from the last immutable snapshot.
    std::shared_ptr<const std::string> view(const std::string& token) const;
    std::shared_ptr<const std::string> peel(const std::string& token, const IdSet& ids);
    std::shared_ptr<const std::string> autostep(const std::string& token, std::size_t k);
    json result(const std::string& token) const;
    // Snapshot without the oracle section.
    json export_analyst(const std::string& token) const;
    // Restores every snapshot in the directory; returns the number loaded.
    std::size_t load_snapshots();
    bool contains(const std::string& token) const;
    std::size_t size() const;

private:
    struct Entry;
    std::shared_ptr<Entry> find(const std::string& token) const;
    void publish(Entry& e, const std::string& token);

    StoreOptions opts_;
    mutable std::shared_mutex mu_;
    std::map<std::string, std::shared_ptr<Entry>> sessions_;
};

class NotFound : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// 128 random bits as 32 lowercase hex digits.
std::string new_token();

// ---- HTTP ---------------------------------------------------------------------------------

struct Response {
    int status = 200;
    std::string body;
    std::string content_type = "application/json";
};

class Service {
public:
    explicit Service(StoreOptions opts = {});

    // Routes one request; usable without a socket.
    Response handle(const std::string& method, const std::string& path, const std::string& body);
    // Blocks serving on host:port; static_dir is mounted at / when given.
    bool serve(const std::string& host, int port,
               const std::optional<std::filesystem::path>& static_dir = std::nullopt,
               const std::function<void(int)>& on_ready = {});
    void stop();
    SessionStore& store() { return store_; }

private:
    SessionStore store_;
    std::mutex server_mu_;
    void* server_ = nullptr;
};

}  // namespace star::service
