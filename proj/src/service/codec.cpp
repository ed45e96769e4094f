#include "star/service.hpp"

namespace star::service {
namespace {

void check_version(const json& body, const std::string& what) {
    if (!body.is_object()) throw ValidationError(what + ": expected a JSON object");
    if (!body.contains("v")) throw ValidationError(what + ".v: missing schema version");
    if (!body["v"].is_number_integer() || body["v"].get<int>() != engine::kSchemaVersion)
        throw ValidationError(what + ".v: unsupported schema version");
}

double number_at(const json& j, const std::string& path) {
    if (!j.is_number()) throw ValidationError(path + ": expected a number");
    return j.get<double>();
}

Dataset decode_data(const json& j) {
    if (!j.is_object()) throw ValidationError("data: expected an object");
    if (!j.contains("p") || !j["p"].is_array()) throw ValidationError("data.p: expected an array");
    Dataset d;
    const json& p = j["p"];
    d.n = p.size();
    d.p.reserve(d.n);
    for (std::size_t i = 0; i < d.n; ++i) d.p.push_back(number_at(p[i], "data.p[" + std::to_string(i) + "]"));
    if (j.contains("covariates") && !j["covariates"].is_null()) {
        const json& cov = j["covariates"];
        if (!cov.is_array()) throw ValidationError("data.covariates: expected an array of rows");
        if (cov.size() != d.n)
            throw ValidationError("data.covariates: expected " + std::to_string(d.n) + " rows, got " +
                                  std::to_string(cov.size()));
        for (std::size_t i = 0; i < d.n; ++i) {
            const std::string path = "data.covariates[" + std::to_string(i) + "]";
            if (!cov[i].is_array()) throw ValidationError(path + ": expected an array");
            if (i == 0) d.dim = cov[i].size();
            if (cov[i].size() != d.dim)
                throw ValidationError(path + ": expected " + std::to_string(d.dim) + " values");
            for (std::size_t k = 0; k < d.dim; ++k)
                d.covariates.push_back(number_at(cov[i][k], path + "[" + std::to_string(k) + "]"));
        }
    }
    engine::validate(d);
    return d;
}

}  // namespace

CreateRequest decode_create(const json& body) {
    check_version(body, "body");
    CreateRequest req;
    if (!body.contains("data")) throw ValidationError("data: missing");
    req.data = decode_data(body["data"]);
    if (body.contains("accum") && !body["accum"].is_null()) {
        try {
            req.accum = accum::accumulator_from_json(body["accum"]);
        } catch (const std::exception& e) {
            throw ValidationError(std::string("accum: ") + e.what());
        }
    }
    req.constraint = engine::constraint_from_json(body.value("constraint", json()), req.data);
    if (!body.contains("alpha")) throw ValidationError("alpha: missing");
    req.alpha = number_at(body["alpha"], "alpha");
    if (!(req.alpha > 0.0 && req.alpha < 1.0)) throw ValidationError("alpha: must lie in (0,1)");
    if (body.contains("seed") && !body["seed"].is_null()) {
        if (!body["seed"].is_number_unsigned()) throw ValidationError("seed: expected a non-negative integer");
        req.seed = body["seed"].get<std::uint64_t>();
    }
    if (body.contains("score")) {
        try {
            req.score = scores::score_config_from_json(body["score"]);
        } catch (const std::invalid_argument& e) {
            throw ValidationError(e.what());
        }
    }
    if (body.contains("disclose_on_halt")) {
        if (!body["disclose_on_halt"].is_boolean()) throw ValidationError("disclose_on_halt: expected a boolean");
        req.disclose_on_halt = body["disclose_on_halt"].get<bool>();
    }
    return req;
}

json encode_create(const Dataset& data, const json& accum, const json& constraint, double alpha,
                   std::uint64_t seed, const json& score, bool disclose_on_halt) {
    json cov = json::array();
    for (std::size_t i = 0; i < data.n; ++i) {
        auto x = data.covariate(static_cast<Id>(i));
        cov.push_back(std::vector<double>(x.begin(), x.end()));
    }
    return {{"v", engine::kSchemaVersion},
            {"data", {{"covariates", std::move(cov)}, {"p", data.p}}},
            {"accum", accum},
            {"constraint", constraint},
            {"alpha", alpha},
            {"seed", seed},
            {"score", score},
            {"disclose_on_halt", disclose_on_halt}};
}

IdSet decode_peel(const json& body) {
    check_version(body, "body");
    if (!body.contains("ids") || !body["ids"].is_array()) throw ValidationError("ids: expected an array");
    IdSet ids;
    for (std::size_t i = 0; i < body["ids"].size(); ++i) {
        const json& v = body["ids"][i];
        if (!v.is_number_integer()) throw ValidationError("ids[" + std::to_string(i) + "]: expected an integer");
        ids.push_back(v.get<Id>());
    }
    return ids;
}

std::size_t decode_autostep(const json& body) {
    check_version(body, "body");
    if (!body.contains("k")) return 1;
    if (!body["k"].is_number_integer() || body["k"].get<long long>() < 1)
        throw ValidationError("k: expected a positive integer");
    return body["k"].get<std::size_t>();
}

json error_body(int status, const std::string& message) {
    return {{"v", engine::kSchemaVersion}, {"status", status}, {"error", message}};
}

json result_body(const engine::Session& s) {
    return {{"v", engine::kSchemaVersion},
            {"halted", true},
            {"step", s.step()},
            {"fdp_hat", s.fdp_hat()},
            {"rejection", s.rejection()}};
}

}  // namespace star::service
