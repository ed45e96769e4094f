#include <regex>

#include "httplib.h"
#include "star/service.hpp"

namespace star::service {
namespace {

Response json_response(int status, const json& body) { return {status, body.dump(), "application/json"}; }

Response error(int status, const std::string& message) { return json_response(status, error_body(status, message)); }

json parse_body(const std::string& body) {
    try {
        return json::parse(body.empty() ? "{}" : body);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("body: malformed JSON: ") + e.what());
    }
}

}  // namespace

Service::Service(StoreOptions opts) : store_(std::move(opts)) {}

Response Service::handle(const std::string& method, const std::string& path, const std::string& body) {
    static const std::regex session_route(R"(^/sessions/([0-9a-f]+)/(view|peel|autostep|result)/?$)");
    try {
        if (path == "/healthz") {
            if (method != "GET") return error(405, "method not allowed");
            return json_response(200, {{"v", engine::kSchemaVersion}, {"status", "ok"}});
        }
        if (path == "/sessions" || path == "/sessions/") {
            if (method != "POST") return error(405, "method not allowed");
            const std::string token = store_.create(decode_create(parse_body(body)));
            return json_response(201, {{"v", engine::kSchemaVersion}, {"token", token}});
        }
        std::smatch m;
        if (!std::regex_match(path, m, session_route)) {
            if (path.rfind("/sessions/", 0) == 0) return error(404, "unknown session token");
            return error(404, "no such route");
        }
        const std::string token = m[1];
        const std::string action = m[2];
        const bool is_get = action == "view" || action == "result";
        if (method != (is_get ? "GET" : "POST")) return error(405, "method not allowed");
        if (action == "view") return {200, *store_.view(token), "application/json"};
        if (action == "result") return json_response(200, store_.result(token));
        if (action == "peel") {
            if (!store_.contains(token)) throw NotFound("unknown session token");
            return {200, *store_.peel(token, decode_peel(parse_body(body))), "application/json"};
        }
        if (!store_.contains(token)) throw NotFound("unknown session token");
        return {200, *store_.autostep(token, decode_autostep(parse_body(body))), "application/json"};
    } catch (const NotFound& e) {
        return error(404, e.what());
    } catch (const engine::PeelError& e) {
        return error(422, e.what());
    } catch (const engine::HaltedError& e) {
        return error(409, e.what());
    } catch (const ValidationError& e) {
        return error(400, e.what());
    } catch (const std::exception& e) {
        return error(500, e.what());
    }
}

bool Service::serve(const std::string& host, int port, const std::optional<std::filesystem::path>& static_dir,
                    const std::function<void(int)>& on_ready) {
    httplib::Server svr;
    if (static_dir && !svr.set_mount_point("/", static_dir->string())) return false;
    auto route = [this](const httplib::Request& req, httplib::Response& res) {
        const Response r = handle(req.method, req.path, req.body);
        res.status = r.status;
        res.set_content(r.body, r.content_type);
    };
    svr.Get(".*", route);
    svr.Post(".*", route);
    const int bound = port == 0 ? svr.bind_to_any_port(host) : (svr.bind_to_port(host, port) ? port : -1);
    if (bound < 0) return false;
    {
        std::lock_guard lock(server_mu_);
        server_ = &svr;
    }
    if (on_ready) on_ready(bound);
    const bool ok = svr.listen_after_bind();
    std::lock_guard lock(server_mu_);
    server_ = nullptr;
    return ok;
}

void Service::stop() {
    std::lock_guard lock(server_mu_);
    if (server_) static_cast<httplib::Server*>(server_)->stop();
}

}  // namespace star::service
