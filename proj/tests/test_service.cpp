#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>
#include <vector>

#include "doctest.h"
#include "httplib.h"
#include "star/evalab.hpp"
#include "star/service.hpp"

using namespace star;
using namespace star::service;

namespace {

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& name) : path(std::filesystem::temp_directory_path() / name) {
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

Dataset grid_data(std::size_t side, std::uint64_t seed) {
    evalab::Rng rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Dataset d;
    d.n = side * side;
    d.dim = 2;
    for (std::size_t r = 0; r < side; ++r)
        for (std::size_t c = 0; c < side; ++c) {
            d.covariates.push_back(static_cast<double>(c));
            d.covariates.push_back(static_cast<double>(r));
            const bool signal = r > side / 4 && r < 3 * side / 4 && c > side / 4 && c < 3 * side / 4;
            d.p.push_back(signal ? u(rng) * 0.01 : u(rng));
        }
    return d;
}

json create_body(const Dataset& d, double alpha = 0.1, const json& score = {{"kind", "canonical"}}) {
    return encode_create(d, {{"kind", "seqstep"}, {"pstar", 0.5}}, {{"kind", "convex2d"}, {"delta", 0.05}}, alpha,
                         7, score);
}

std::string create(Service& svc, const json& body) {
    const auto r = svc.handle("POST", "/sessions", body.dump());
    REQUIRE(r.status == 201);
    const auto j = json::parse(r.body);
    CHECK(j["v"] == 1);
    return j["token"].get<std::string>();
}

json v1(json j) {
    j["v"] = 1;
    return j;
}

}  // namespace

TEST_CASE("tokens are 128-bit hex strings") {
    const auto a = new_token();
    CHECK(a.size() == 32);
    CHECK(a.find_first_not_of("0123456789abcdef") == std::string::npos);
    CHECK(new_token() != a);
}

TEST_CASE("routes and status codes") {
    Service svc;
    CHECK(svc.handle("GET", "/healthz", "").status == 200);
    CHECK(svc.handle("POST", "/healthz", "").status == 405);
    CHECK(svc.handle("GET", "/sessions", "").status == 405);
    CHECK(svc.handle("GET", "/nowhere", "").status == 404);
    CHECK(svc.handle("GET", "/sessions/0123456789abcdef0123456789abcdef/view", "").status == 404);
    CHECK(svc.handle("GET", "/sessions/zz/view", "").status == 404);

    CHECK(svc.handle("POST", "/sessions", "{not json").status == 400);
    auto body = create_body(grid_data(10, 1));
    auto no_v = body;
    no_v.erase("v");
    CHECK(svc.handle("POST", "/sessions", no_v.dump()).status == 400);
    auto v2 = body;
    v2["v"] = 2;
    CHECK(svc.handle("POST", "/sessions", v2.dump()).status == 400);
    auto bad_alpha = body;
    bad_alpha["alpha"] = 1.5;
    const auto r400 = svc.handle("POST", "/sessions", bad_alpha.dump());
    CHECK(r400.status == 400);
    CHECK(json::parse(r400.body)["error"].get<std::string>().find("alpha") != std::string::npos);
    CHECK(json::parse(r400.body)["v"] == 1);
    auto bad_p = body;
    bad_p["data"]["p"][3] = -0.5;
    CHECK(svc.handle("POST", "/sessions", bad_p.dump()).status == 400);
    auto bad_rule = body;
    bad_rule["score"] = {{"kind", "gauss_isotonic"}};
    CHECK(svc.handle("POST", "/sessions", bad_rule.dump()).status == 400);

    const std::string tok = create(svc, body);
    const std::string base = "/sessions/" + tok;
    CHECK(svc.handle("POST", base + "/view", "").status == 405);
    CHECK(svc.handle("GET", base + "/peel", "").status == 405);

    const auto view = svc.handle("GET", base + "/view", "");
    CHECK(view.status == 200);
    CHECK(view.content_type == "application/json");
    const auto vj = json::parse(view.body);
    CHECK(vj["v"] == 1);
    CHECK(vj["step"] == 0);
    CHECK(vj["halted"] == false);

    CHECK(svc.handle("GET", base + "/result", "").status == 409);
    CHECK(svc.handle("POST", base + "/peel", v1({{"ids", json::array()}}).dump()).status == 422);
    CHECK(svc.handle("POST", base + "/peel", v1({{"ids", {100000}}}).dump()).status == 422);
    CHECK(svc.handle("POST", base + "/peel", json({{"ids", {0}}}).dump()).status == 400);
    CHECK(svc.handle("POST", base + "/peel", v1({{"ids", {"a"}}}).dump()).status == 400);

    const auto first = vj["candidates"][0];
    const auto peeled = svc.handle("POST", base + "/peel", v1({{"ids", first}}).dump());
    CHECK(peeled.status == 200);
    CHECK(json::parse(peeled.body)["step"] == 1);
    CHECK(svc.handle("POST", base + "/peel", v1({{"ids", first}}).dump()).status == 422);

    CHECK(svc.handle("POST", base + "/autostep", v1({{"k", 0}}).dump()).status == 400);
    const auto two = svc.handle("POST", base + "/autostep", v1({{"k", 2}}).dump());
    CHECK(two.status == 200);
    CHECK(json::parse(two.body)["step"] == 3);
    json last;
    for (int guard = 0; guard < 1000; ++guard) {
        const auto r = svc.handle("POST", base + "/autostep", v1({{"k", 25}}).dump());
        REQUIRE(r.status == 200);
        last = json::parse(r.body);
        if (last["halted"] == true) break;
    }
    REQUIRE(last["halted"] == true);
    CHECK(svc.handle("POST", base + "/autostep", v1({}).dump()).status == 409);
    CHECK(svc.handle("POST", base + "/peel", v1({{"ids", {0}}}).dump()).status == 409);
    const auto res = svc.handle("GET", base + "/result", "");
    CHECK(res.status == 200);
    const auto rj = json::parse(res.body);
    CHECK(rj["v"] == 1);
    CHECK(rj["halted"] == true);
    CHECK(rj["rejection"] == last["rejection"]);
    CHECK((rj["fdp_hat"].get<double>() <= 0.1 || rj["rejection"].empty()));
}

TEST_CASE("masking audit over a full transcript") {
    Service svc;
    const Dataset d = grid_data(14, 3);
    const std::string tok = create(svc, create_body(d));
    const auto spec = AccumulatorSpec::seqstep(0.5);
    std::vector<std::string> transcript{svc.handle("GET", "/sessions/" + tok + "/view", "").body};
    while (true) {
        const auto r = svc.handle("POST", "/sessions/" + tok + "/autostep", v1({}).dump());
        REQUIRE(r.status == 200);
        if (json::parse(r.body)["halted"] == true) break;
        transcript.push_back(r.body);
    }
    CHECK(transcript.size() > 5);
    for (const auto& body : transcript) {
        const auto j = json::parse(body);
        REQUIRE(j["halted"] == false);
        std::vector<char> masked(d.n, 0);
        for (const auto& m : j["masked"]) {
            CHECK_FALSE(m.contains("p"));
            masked[m["id"].get<std::size_t>()] = 1;
        }
        for (const auto& r : j["revealed"]) CHECK_FALSE(masked[r["id"].get<std::size_t>()]);
        for (std::size_t i = 0; i < d.n; ++i) {
            // on the lower branch g equals p, so only upper-branch values can leak
            if (!masked[i] || d.p[i] <= spec.fixed_point()) continue;
            CHECK(body.find(json(d.p[i]).dump()) == std::string::npos);
        }
    }
}

TEST_CASE("snapshots restore byte-identical views") {
    TempDir dir("star_test_snapshots");
    std::string tok;
    std::string before;
    {
        Service svc(StoreOptions{dir.path});
        tok = create(svc, create_body(grid_data(12, 5)));
        svc.handle("POST", "/sessions/" + tok + "/autostep", v1({{"k", 3}}).dump());
        before = svc.handle("GET", "/sessions/" + tok + "/view", "").body;
        CHECK(std::filesystem::exists(dir.path / (tok + ".json")));
        const auto exported = svc.store().export_analyst(tok);
        CHECK_FALSE(exported.contains("oracle"));
    }
    Service restored(StoreOptions{dir.path});
    CHECK(restored.store().load_snapshots() == 1);
    CHECK(restored.handle("GET", "/sessions/" + tok + "/view", "").body == before);

    Service fresh;
    const std::string t2 = create(fresh, create_body(grid_data(12, 5)));
    fresh.handle("POST", "/sessions/" + t2 + "/autostep", v1({{"k", 3}}).dump());
    const auto a = restored.handle("POST", "/sessions/" + tok + "/autostep", v1({{"k", 1000}}).dump());
    const auto b = fresh.handle("POST", "/sessions/" + t2 + "/autostep", v1({{"k", 1000}}).dump());
    CHECK(a.body == b.body);
}

TEST_CASE("sessions run independently under concurrent access") {
    Service svc;
    std::vector<std::string> tokens;
    for (int i = 0; i < 6; ++i) tokens.push_back(create(svc, create_body(grid_data(10, 10 + i))));
    std::vector<std::thread> workers;
    std::atomic<int> failures{0};
    for (int i = 0; i < 6; ++i) {
        workers.emplace_back([&, i] {
            const std::string base = "/sessions/" + tokens[i];
            for (int k = 0; k < 200; ++k) {
                if (svc.handle("GET", base + "/view", "").status != 200) ++failures;
                const auto r = svc.handle("POST", base + "/autostep", v1({}).dump());
                if (r.status == 409) break;
                if (r.status != 200) ++failures;
            }
            // readers of another session
            if (svc.handle("GET", "/sessions/" + tokens[(i + 1) % 6] + "/view", "").status != 200) ++failures;
        });
    }
    for (auto& t : workers) t.join();
    CHECK(failures == 0);
    for (const auto& t : tokens) {
        CHECK(svc.handle("GET", "/sessions/" + t + "/result", "").status == 200);
    }
    CHECK(svc.store().size() == 6);
}

TEST_CASE("dataset csv") {
    std::istringstream in("# comment\nid,x1,x2,p\n1,0.5,1,0.2\n0,1.5,2,0.9\n");
    const Dataset d = read_dataset_csv(in);
    CHECK(d.n == 2);
    CHECK(d.dim == 2);
    CHECK(d.p == std::vector<double>{0.9, 0.2});
    CHECK(d.covariates[0] == 1.5);
    std::ostringstream out;
    write_dataset_csv(out, d);
    std::istringstream again(out.str());
    const Dataset e = read_dataset_csv(again);
    CHECK(e.p == d.p);
    CHECK(e.covariates == d.covariates);

    auto bad = [](const std::string& text) {
        std::istringstream s(text);
        return read_dataset_csv(s);
    };
    CHECK_THROWS_AS(bad("id,p\n0,1.5\n"), ValidationError);
    CHECK_THROWS_AS(bad("id,p\n0,0.5\n0,0.5\n"), ValidationError);
    CHECK_THROWS_AS(bad("id,p\n3,0.5\n"), ValidationError);
    CHECK_THROWS_AS(bad("id,y,p\n0,1,0.5\n"), ValidationError);
    CHECK_THROWS_AS(bad("id,p\n0,abc\n"), ValidationError);
    CHECK_THROWS_AS(bad("id,x1,p\n0,0.5\n"), ValidationError);
    CHECK(bad("id,p\n0,0.25\n").dim == 0);
}

TEST_CASE("structure csv and constraint json") {
    std::istringstream tree_in("child,parent\n0,\n1,0\n2,0\n3,1\n");
    const auto rows = read_structure_csv(tree_in);
    CHECK(rows.n == 4);
    CHECK(rows.roots == std::vector<Id>{0});
    const auto tj = constraint_json("tree", rows, 4, 0.02, 100);
    CHECK(tj["parent"] == json({nullptr, 0, 0, 1}));
    Dataset d;
    d.n = 4;
    d.p = {0.1, 0.2, 0.3, 0.4};
    const auto c = engine::constraint_from_json(tj, d);
    std::ostringstream out;
    write_structure_csv(out, c);
    CHECK(out.str() == "child,parent\n0,\n1,0\n2,0\n3,1\n");

    std::istringstream dag_in("child,parent\n0,\n1,\n2,0\n2,1\n");
    const auto dj = constraint_json("dag_weak", read_structure_csv(dag_in), 3, 0.02, 100);
    CHECK(dj["edges"].size() == 2);

    std::istringstream two_parents("child,parent\n0,\n1,\n2,0\n2,1\n");
    CHECK_THROWS_AS(constraint_json("tree", read_structure_csv(two_parents), 3, 0.02, 100), ValidationError);
    CHECK_THROWS_AS(constraint_json("tree", std::nullopt, 3, 0.02, 100), ValidationError);
    CHECK_THROWS_AS(constraint_json("blob", std::nullopt, 3, 0.02, 100), ValidationError);
    CHECK(constraint_json("convex2d", std::nullopt, 3, 0.1, 12)["angles"] == 12);
    std::istringstream bad("parent,child\n");
    CHECK_THROWS_AS(read_structure_csv(bad), ValidationError);
    std::istringstream big("child,parent\n9,0\n");
    CHECK_THROWS_AS(constraint_json("dag_strong", read_structure_csv(big), 3, 0.02, 100), ValidationError);
}

TEST_CASE("codec") {
    const Dataset d = grid_data(4, 1);
    const auto body = create_body(d, 0.2);
    const auto req = decode_create(body);
    CHECK(req.alpha == 0.2);
    CHECK(req.seed == 7);
    CHECK(req.data.p == d.p);
    CHECK(req.constraint.kind() == constraints::Kind::Convex2d);
    CHECK(req.constraint.delta() == 0.05);
    CHECK(decode_autostep(v1({})) == 1);
    CHECK(decode_autostep(v1({{"k", 5}})) == 5);
    CHECK(decode_peel(v1({{"ids", {3, 1}}})) == IdSet{3, 1});
    auto no_data = body;
    no_data.erase("data");
    CHECK_THROWS_AS(decode_create(no_data), ValidationError);
    auto ragged = body;
    ragged["data"]["covariates"][1] = {1.0};
    CHECK_THROWS_AS(decode_create(ragged), ValidationError);
    auto bad_accum = body;
    bad_accum["accum"] = {{"kind", "zigzag"}};
    CHECK_THROWS_AS(decode_create(bad_accum), ValidationError);
    CHECK(error_body(404, "x") == json({{"v", 1}, {"status", 404}, {"error", "x"}}));
}

TEST_CASE("live server answers over a socket") {
    TempDir dir("star_test_static");
    {
        std::ofstream(dir.path / "index.html") << "<html>console</html>";
    }
    Service svc;
    std::atomic<int> port{0};
    std::thread server([&] { svc.serve("127.0.0.1", 0, dir.path, [&](int p) { port = p; }); });
    for (int i = 0; i < 500 && port == 0; ++i) std::this_thread::sleep_for(std::chrono::milliseconds(10));
    REQUIRE(port > 0);
    httplib::Client cli("127.0.0.1", port);
    const auto health = cli.Get("/healthz");
    REQUIRE(health);
    CHECK(health->status == 200);
    const auto page = cli.Get("/index.html");
    REQUIRE(page);
    CHECK(page->body == "<html>console</html>");
    const auto created = cli.Post("/sessions", create_body(grid_data(8, 2)).dump(), "application/json");
    REQUIRE(created);
    CHECK(created->status == 201);
    const auto tok = json::parse(created->body)["token"].get<std::string>();
    const auto view = cli.Get("/sessions/" + tok + "/view");
    REQUIRE(view);
    CHECK(json::parse(view->body)["n"] == 64);
    const auto missing = cli.Get("/sessions/" + std::string(32, 'a') + "/view");
    REQUIRE(missing);
    CHECK(missing->status == 404);
    svc.stop();
    server.join();
}
