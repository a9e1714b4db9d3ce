#include <catch_amalgamated.hpp>

#include <featline/service.hpp>

#include "support/fixtures.hpp"

#include <atomic>
#include <thread>

using namespace featline;
using featline::Json;

namespace {

    /// A server on an ephemeral loopback port, served from a background thread.
    struct Running
    {
        explicit Running(service::Config config = {}) : server(std::move(config))
        {
            port = server.bind_any_port("127.0.0.1");
            REQUIRE(port > 0);
            thread = std::thread([this] { server.listen_after_bind(); });
            server.wait_until_ready();
        }

        ~Running()
        {
            server.stop();
            thread.join();
        }

        auto client() const -> httplib::Client
        {
            httplib::Client c("127.0.0.1", port);
            c.set_read_timeout(30, 0);
            return c;
        }

        service::Server server;
        int port = 0;
        std::thread thread;
    };

    struct Reply
    {
        int status = 0;
        Json body;
    };

    auto reply(const httplib::Result & r) -> Reply
    {
        REQUIRE(r);
        Reply out{r->status, nullptr};
        if (! r->body.empty())
            out.body = Json::parse(r->body);
        return out;
    }

    auto post(httplib::Client & c, const std::string & path, const Json & body) -> Reply
    {
        return reply(c.Post(path, body.dump(), "application/json"));
    }

    auto get(httplib::Client & c, const std::string & path) -> Reply { return reply(c.Get(path)); }

    auto add_model(httplib::Client & c, const std::string & text) -> std::string
    {
        auto r = post(c, "/models", {{"text", text}});
        REQUIRE(r.status == 200);
        return r.body["model_id"].get<std::string>();
    }

    auto start_session(httplib::Client & c, const std::string & model) -> std::string
    {
        auto r = post(c, "/sessions", {{"model_id", model}});
        REQUIRE(r.status == 200);
        return r.body["session_id"].get<std::string>();
    }

    auto fix(Int v) -> Json { return {{"kind", "fix"}, {"value", v}}; }

    auto var_of(const Json & view, const std::string & name) -> Json
    {
        for (const auto & v : view["vars"])
            if (v["name"] == name)
                return v;
        FAIL("no variable " << name);
        return {};
    }

    const std::string void_model = "model V\nfeature R\nfeature A of R mandatory\nfeature B of R mandatory\nA excludes B\n";
}

TEST_CASE("models: upload, summary, analyses", "[service]")
{
    Running s;
    auto c = s.client();

    auto up = post(c, "/models", {{"text", read_fixture("vmc.fm")}});
    REQUIRE(up.status == 200);
    CHECK(up.body["diagnostics"].empty());
    auto id = up.body["model_id"].get<std::string>();

    auto summary = get(c, "/models/" + id);
    CHECK(summary.status == 200);

    auto count = post(c, "/models/" + id + "/analyses", {{"kind", "count"}, {"params", {{"project", "features"}}}});
    REQUIRE(count.status == 200);
    CHECK(count.body["kind"] == "count");
    CHECK(count.body["result"]["count"] == 57800);
    CHECK(count.body["result"]["exact"] == true);
    CHECK(count.body.contains("elapsed_ms"));

    auto cd = post(c, "/models/" + id + "/analyses", {{"kind", "core_dead"}});
    REQUIRE(cd.status == 200);
    auto core = cd.body["result"]["core"].get<std::vector<std::string>>();
    CHECK(std::find(core.begin(), core.end(), "Feedback") == core.end());
    CHECK(cd.body["result"]["dead"].empty());
}

TEST_CASE("error statuses", "[service]")
{
    Running s;
    auto c = s.client();

    auto bad = post(c, "/models", {{"text", "model M\nfeature\n"}});
    CHECK(bad.status == 400);
    CHECK(bad.body["error"]["code"] == "parse_error");
    CHECK(! bad.body["error"]["diagnostics"].empty());

    CHECK(reply(c.Post("/models", "{not json", "application/json")).status == 400);
    CHECK(post(c, "/models", {{"txt", "x"}}).status == 400);

    auto missing = get(c, "/models/m0000");
    CHECK(missing.status == 404);
    CHECK(missing.body["error"]["code"] == "not_found");
    CHECK(get(c, "/sessions/s0000").status == 404);
    CHECK(post(c, "/sessions/s0000/decisions", {{"name", "A"}, {"restriction", fix(1)}}).status == 404);

    auto vm = add_model(c, void_model);
    auto v = post(c, "/sessions", {{"model_id", vm}});
    CHECK(v.status == 422);
    CHECK(v.body["error"]["code"] == "void_model");
    CHECK(post(c, "/models/" + vm + "/analyses", {{"kind", "core_dead"}}).status == 422);

    auto m = add_model(c, read_fixture("vmc.fm"));
    CHECK(post(c, "/models/" + m + "/analyses", {{"kind", "no_such_kind"}}).status == 400);
    auto sid = start_session(c, m);
    CHECK(post(c, "/sessions/" + sid + "/decisions", {{"name", "Nope"}, {"restriction", fix(1)}}).status == 400);
    CHECK(post(c, "/sessions/" + sid + "/decisions", {{"name", "Audio"}}).status == 400);
    CHECK(post(c, "/sessions/" + sid + "/decisions", {{"name", "Audio"}, {"restriction", {{"kind", "near"}, {"value", 1}}}}).status == 400);
    CHECK(post(c, "/sessions/" + sid + "/constraints", {{"expr_text", "Audio +"}}).status == 400);
    CHECK(post(c, "/sessions/" + sid + "/undo", {{"k", 1}}).status == 400);
    CHECK(post(c, "/sessions/" + sid + "/optimize", {{"goal", "nothing"}}).status == 400);
}

TEST_CASE("the XOR constraint rejects a second choice with a culprit", "[service]")
{
    Running s;
    auto c = s.client();
    auto sid = start_session(c, add_model(c, read_fixture("vmc.fm")));
    auto base = "/sessions/" + sid;

    auto xor_ = post(c, base + "/constraints", {{"expr_text", "Visual + Audio = 1"}});
    REQUIRE(xor_.status == 200);
    auto visual = post(c, base + "/decisions", {{"name", "Visual"}, {"restriction", fix(1)}});
    REQUIRE(visual.status == 200);
    // Read-your-writes: the response carries the view after the action.
    CHECK(var_of(visual.body["view"], "Audio")["status"] == "forced_out");
    CHECK(visual.body["view"] == get(c, base).body["view"]);

    auto audio = post(c, base + "/decisions", {{"name", "Audio"}, {"restriction", fix(1)}});
    CHECK(audio.status == 409);
    CHECK(audio.body["error"]["code"] == "conflict");
    CHECK(audio.body["error"]["culprit"] == "Visual + Audio = 1");
    CHECK(audio.body["error"]["variable"] == "Audio");

    auto after = get(c, base);
    CHECK(after.body["log"].size() == 2);
    CHECK(var_of(after.body["view"], "Audio")["status"] == "forced_out");

    auto undone = post(c, base + "/undo", {{"k", 1}});
    REQUIRE(undone.status == 200);
    CHECK(var_of(undone.body["view"], "Audio")["status"] == "open");
    CHECK(undone.body["view"] == get(c, base).body["view"]);
    CHECK(get(c, base).body["log"].size() == 1);
}

TEST_CASE("solution iteration ends with 204", "[service]")
{
    Running s;
    auto c = s.client();
    auto sid = start_session(c, add_model(c, "model One\nfeature R\nfeature A of R mandatory\n"));
    auto first = post(c, "/sessions/" + sid + "/solutions/next", Json::object());
    REQUIRE(first.status == 200);
    CHECK(first.body["solution"]["A"] == 1);
    CHECK(post(c, "/sessions/" + sid + "/solutions/next", Json::object()).status == 204);
}

TEST_CASE("optimize within a session", "[service]")
{
    Running s;
    auto c = s.client();
    auto sid = start_session(c, add_model(c, read_fixture("stago.fm")));
    auto r = post(c, "/sessions/" + sid + "/optimize", {{"goal", "cost"}});
    REQUIRE(r.status == 200);
    CHECK(r.body["value"] == 2); // equal to the brute-force optimum
    CHECK(r.body["proven"] == true);
    CHECK(r.body["direction"] == "minimize");
}

TEST_CASE("a session log replays on a fresh server", "[service]")
{
    Json log, view;
    {
        Running s;
        auto c = s.client();
        auto sid = start_session(c, add_model(c, read_fixture("vmc.fm")));
        REQUIRE(post(c, "/sessions/" + sid + "/decisions", {{"name", "SpeedSensor"}, {"restriction", {{"kind", "at_least"}, {"value", 1}}}}).status == 200);
        REQUIRE(post(c, "/sessions/" + sid + "/constraints", {{"expr_text", "Visual + Audio = 1"}}).status == 200);
        auto state = get(c, "/sessions/" + sid);
        log = state.body["log"];
        view = state.body["view"];
    }
    Running s;
    auto c = s.client();
    auto r = post(c, "/sessions", {{"model_id", add_model(c, read_fixture("vmc.fm"))}, {"log", log}});
    REQUIRE(r.status == 200);
    CHECK(r.body["log"] == log);
    CHECK(r.body["view"] == view);
    CHECK(var_of(view, "Vibration")["status"] == "forced_out");

    // A log whose action conflicts is refused.
    Json bad = log;
    bad.push_back({{"kind", "decide"}, {"name", "Vibration"}, {"restriction", fix(1)}});
    CHECK(post(c, "/sessions", {{"model_id", add_model(c, read_fixture("vmc.fm"))}, {"log", bad}}).status == 400);
}

TEST_CASE("concurrent requests on one session are serialized", "[service]")
{
    Running s;
    auto setup = s.client();
    auto model = add_model(setup, read_fixture("vmc.fm"));
    auto sid = start_session(setup, model);
    auto other = start_session(setup, model);

    constexpr int threads = 8, per_thread = 5;
    std::atomic<int> ok{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t)
        pool.emplace_back([&, t] {
            auto c = s.client();
            for (int i = 0; i < per_thread; ++i) {
                auto target = (t % 2 == 0) ? sid : other;
                auto r = c.Post("/sessions/" + target + "/decisions",
                    Json{{"name", "Sensor"}, {"restriction", {{"kind", "at_least"}, {"value", 1}}}}.dump(), "application/json");
                if (r && r->status == 200)
                    ++ok;
                c.Get("/sessions/" + target);
            }
        });
    for (auto & t : pool)
        t.join();

    CHECK(ok == threads * per_thread);
    auto c = s.client();
    // No action is lost or duplicated.
    CHECK(get(c, "/sessions/" + sid).body["log"].size() == threads / 2 * per_thread);
    CHECK(get(c, "/sessions/" + other).body["log"].size() == threads / 2 * per_thread);
}

TEST_CASE("integers beyond 2^53 are sent as strings", "[service]")
{
    Running s;
    auto c = s.client();
    auto m = add_model(c, "model Big\nfeature R\n  attr Id in [9007199254740993..9007199254740994]\n");
    auto sid = start_session(c, m);
    auto d = post(c, "/sessions/" + sid + "/decisions", {{"name", "R.Id"}, {"restriction", {{"kind", "fix"}, {"value", "9007199254740994"}}}});
    REQUIRE(d.status == 200);
    auto id = var_of(d.body["view"], "R.Id");
    CHECK(id["value"] == "9007199254740994");
    CHECK(id["domain"] == Json::parse(R"([["9007199254740994","9007199254740994"]])"));
    auto sol = post(c, "/sessions/" + sid + "/solutions/next", Json::object());
    REQUIRE(sol.status == 200);
    CHECK(sol.body["solution"]["R.Id"] == "9007199254740994");
}

TEST_CASE("idle sessions expire and deleted sessions are gone", "[service]")
{
    service::Config config;
    config.session_ttl = std::chrono::milliseconds(100);
    Running s(config);
    auto c = s.client();
    auto model = add_model(c, read_fixture("vmc.fm"));

    auto kept = start_session(c, model);
    auto dropped = start_session(c, model);
    auto del = c.Delete("/sessions/" + dropped);
    REQUIRE(del);
    CHECK(del->status == 204);
    CHECK(get(c, "/sessions/" + dropped).status == 404);

    std::this_thread::sleep_for(std::chrono::milliseconds(250));
    CHECK(get(c, "/sessions/" + kept).status == 404);
    CHECK(s.server.session_count() == 0);
}

TEST_CASE("CORS preflight", "[service]")
{
    Running s;
    auto c = s.client();
    auto r = c.Options("/models");
    REQUIRE(r);
    CHECK(r->status == 204);
    CHECK(r->get_header_value("Access-Control-Allow-Origin") == "*");
    CHECK(r->get_header_value("Access-Control-Allow-Methods").find("POST") != std::string::npos);
}
