#include <fstream>
#include <random>

#include "star/service.hpp"

namespace star::service {

struct SessionStore::Entry {
    Entry(engine::Session s, scores::ScoreConfig cfg)
        : session(std::move(s)), score(std::move(cfg)), rule(scores::make_rule(score)) {}

    std::mutex mu;  // serializes mutations
    engine::Session session;
    scores::ScoreConfig score;
    std::unique_ptr<engine::UpdateRule> rule;

    mutable std::mutex pub_mu;
    std::shared_ptr<const std::string> view;
};

std::string new_token() {
    static thread_local std::random_device rd;
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (int w = 0; w < 4; ++w) {
        std::uint32_t v = rd();
        for (int k = 0; k < 8; ++k, v >>= 4) out.push_back(hex[v & 0xF]);
    }
    return out;
}

SessionStore::SessionStore(StoreOptions opts) : opts_(std::move(opts)) {
    if (opts_.snapshot_dir) std::filesystem::create_directories(*opts_.snapshot_dir);
}

std::shared_ptr<SessionStore::Entry> SessionStore::find(const std::string& token) const {
    std::shared_lock lock(mu_);
    auto it = sessions_.find(token);
    if (it == sessions_.end()) throw NotFound("unknown session token");
    return it->second;
}

bool SessionStore::contains(const std::string& token) const {
    std::shared_lock lock(mu_);
    return sessions_.count(token) > 0;
}

std::size_t SessionStore::size() const {
    std::shared_lock lock(mu_);
    return sessions_.size();
}

void SessionStore::publish(Entry& e, const std::string& token) {
    auto body = std::make_shared<const std::string>(engine::view_to_json(*e.session.view()).dump());
    {
        std::lock_guard lock(e.pub_mu);
        e.view = std::move(body);
    }
    if (!opts_.snapshot_dir) return;
    const json snap = {{"v", engine::kSchemaVersion},
                       {"token", token},
                       {"score", scores::to_json(e.score)},
                       {"session", engine::snapshot_to_json(e.session, true)}};
    const auto path = *opts_.snapshot_dir / (token + ".json");
    const auto tmp = *opts_.snapshot_dir / (token + ".json.tmp");
    {
        std::ofstream out(tmp);
        out << snap.dump();
    }
    std::filesystem::rename(tmp, path);
}

std::string SessionStore::create(CreateRequest req) {
    engine::Session s(std::move(req.data), std::move(req.accum), std::move(req.constraint), req.alpha,
                      req.seed, req.disclose_on_halt);
    auto entry = std::make_shared<Entry>(std::move(s), req.score);
    entry->rule->check_compatible(entry->session.constraint());
    std::string token;
    {
        std::unique_lock lock(mu_);
        do token = new_token();
        while (sessions_.count(token));
        sessions_[token] = entry;
    }
    std::lock_guard lock(entry->mu);
    publish(*entry, token);
    return token;
}

std::shared_ptr<const std::string> SessionStore::view(const std::string& token) const {
    auto e = find(token);
    std::lock_guard lock(e->pub_mu);
    return e->view;
}

std::shared_ptr<const std::string> SessionStore::peel(const std::string& token, const IdSet& ids) {
    auto e = find(token);
    std::lock_guard lock(e->mu);
    e->session.peel(ids);
    publish(*e, token);
    std::lock_guard pub(e->pub_mu);
    return e->view;
}

std::shared_ptr<const std::string> SessionStore::autostep(const std::string& token, std::size_t k) {
    auto e = find(token);
    std::lock_guard lock(e->mu);
    if (e->session.halted()) throw engine::HaltedError("session has halted; no further peels are accepted");
    engine::run_auto(e->session, *e->rule, k);
    publish(*e, token);
    std::lock_guard pub(e->pub_mu);
    return e->view;
}

json SessionStore::result(const std::string& token) const {
    auto e = find(token);
    std::lock_guard lock(e->mu);
    return result_body(e->session);
}

json SessionStore::export_analyst(const std::string& token) const {
    auto e = find(token);
    std::lock_guard lock(e->mu);
    return engine::snapshot_to_json(e->session, false);
}

std::size_t SessionStore::load_snapshots() {
    if (!opts_.snapshot_dir) return 0;
    std::size_t loaded = 0;
    for (const auto& f : std::filesystem::directory_iterator(*opts_.snapshot_dir)) {
        if (f.path().extension() != ".json") continue;
        std::ifstream in(f.path());
        const json snap = json::parse(in);
        const std::string token = snap.at("token").get<std::string>();
        auto entry = std::make_shared<Entry>(engine::session_from_snapshot(snap.at("session")),
                                             scores::score_config_from_json(snap.at("score")));
        {
            std::unique_lock lock(mu_);
            sessions_[token] = entry;
        }
        std::lock_guard lock(entry->mu);
        publish(*entry, token);
        ++loaded;
    }
    return loaded;
}

}  // namespace star::service
