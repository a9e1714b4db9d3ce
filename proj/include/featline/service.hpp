#ifndef FEATLINE_SERVICE_HPP
#define FEATLINE_SERVICE_HPP

#include <featline/session.hpp>

#include <httplib.h>

#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <random>
#include <unordered_map>

namespace featline::service {

struct Config
{
    std::chrono::milliseconds session_ttl{std::chrono::hours(1)};
    std::int64_t time_budget_ms = 10'000;
    std::string cors_origin = "*";
    std::uint64_t view_count_cap = session::default_view_cap;

    /// Defaults overridden by FEATLINE_TIME_BUDGET_MS, FEATLINE_SESSION_TTL_S and FEATLINE_CORS_ORIGIN.
    static auto from_env() -> Config
    {
        Config c;
        auto number = [](const char * name) -> std::optional<std::int64_t> {
            const char * v = std::getenv(name);
            if (! v || ! *v)
                return std::nullopt;
            char * end = nullptr;
            long long n = std::strtoll(v, &end, 10);
            if (*end != '\0' || n <= 0)
                throw InvalidArgument(std::string(name) + " must be a positive integer");
            return n;
        };
        if (auto ms = number("FEATLINE_TIME_BUDGET_MS"))
            c.time_budget_ms = *ms;
        if (auto s = number("FEATLINE_SESSION_TTL_S"))
            c.session_ttl = std::chrono::seconds(*s);
        if (const char * o = std::getenv("FEATLINE_CORS_ORIGIN"); o && *o)
            c.cors_origin = o;
        return c;
    }
};

namespace detail {

    /// FIFO mutual exclusion: waiters are served in ticket order.
    class TicketLock
    {
    public:
        auto lock() -> void
        {
            std::unique_lock guard(_m);
            auto ticket = _next++;
            _cv.wait(guard, [&] { return _serving == ticket; });
        }
        auto unlock() -> void
        {
            {
                std::lock_guard guard(_m);
                ++_serving;
            }
            _cv.notify_all();
        }

    private:
        std::mutex _m;
        std::condition_variable _cv;
        std::uint64_t _next = 0;
        std::uint64_t _serving = 0;
    };

    struct ModelEntry
    {
        fm::FeatureModel model;
        std::vector<fm::Diagnostic> diagnostics;
    };

    struct SessionEntry
    {
        TicketLock lock;
        std::unique_ptr<session::Session> session;
        std::atomic<std::int64_t> last_used{0};
    };

    struct HttpError
    {
        int status;
        Json body;
    };

    inline auto status_for(const std::string & code) -> int
    {
        if (code == "void_model" || code == "unsatisfiable")
            return 422;
        if (code == "internal")
            return 500;
        return 400;
    }

    inline auto body_of(const httplib::Request & req) -> Json
    {
        if (req.body.empty())
            return Json::object();
        try {
            auto j = Json::parse(req.body);
            if (! j.is_object())
                throw HttpError{400, error_json("invalid_argument", "request body must be a JSON object")};
            return j;
        }
        catch (const Json::parse_error & e) {
            throw HttpError{400, error_json("invalid_json", e.what())};
        }
    }

    inline auto string_field(const Json & body, const char * key) -> std::string
    {
        if (! body.contains(key) || ! body[key].is_string())
            throw HttpError{400, error_json("invalid_argument", std::string("missing string field '") + key + "'")};
        return body[key].get<std::string>();
    }

    inline auto feature_json(const fm::FeatureModel & m, const fm::Feature & f) -> Json
    {
        Json attrs = Json::array();
        for (const auto & a : f.attributes)
            attrs.push_back({{"name", a.name}, {"domain", domain_json(m.domain_of(a))}});
        Json out = {{"name", f.name}, {"max", int_json(f.max_count)}};
        out["parent"] = f.parent ? Json(*f.parent) : Json(nullptr);
        out["edge"] = f.parent ? Json(f.edge == fm::Edge::Mandatory ? "mandatory" : "optional") : Json(nullptr);
        out["attributes"] = attrs;
        return out;
    }

    inline auto model_summary(const std::string & id, const ModelEntry & e) -> Json
    {
        const auto & m = e.model;
        Json features = Json::array(), enums = Json::array(), groups = Json::array(), cross = Json::array(),
             constraints = Json::array(), goals = Json::array(), diags = Json::array();
        for (const auto & f : m.features)
            features.push_back(feature_json(m, f));
        for (const auto & en : m.enums)
            enums.push_back({{"name", en.name}, {"codes", en.codes}});
        for (const auto & g : m.groups)
            groups.push_back({{"parent", g.parent}, {"members", g.members}, {"min", int_json(g.min)}, {"max", int_json(g.max)}});
        for (const auto & d : m.cross_deps)
            cross.push_back(fm::detail::cross_label(d));
        for (const auto & c : m.constraints)
            constraints.push_back(fm::to_text(c));
        for (const auto & g : m.goals)
            goals.push_back({{"name", g.name}, {"direction", analysis::direction_name(g.direction)}, {"expr", fm::to_text(g.expr)}});
        for (const auto & d : e.diagnostics)
            diags.push_back(diagnostic_json(d));
        return {{"model_id", id}, {"name", m.name}, {"features", features}, {"enums", enums}, {"groups", groups},
            {"cross_dependencies", cross}, {"constraints", constraints}, {"goals", goals}, {"diagnostics", diags}};
    }

} // namespace detail

/**
 * HTTP/JSON front end. Models and sessions live in in-memory registries keyed
 * by opaque ids; requests on one session run one at a time in arrival order,
 * requests on distinct sessions run concurrently.
 */
class Server
{
public:
    explicit Server(Config config = Config::from_env()) : _config(std::move(config)), _ids(std::random_device{}()) { routes(); }

    Server(const Server &) = delete;
    auto operator=(const Server &) -> Server & = delete;

    /// Blocks serving requests until stop().
    auto listen(const std::string & host, int port) -> bool { return _http.listen(host, port); }

    /// Binds an ephemeral port and returns it; follow with listen_after_bind().
    auto bind_any_port(const std::string & host) -> int { return _http.bind_to_any_port(host); }
    auto listen_after_bind() -> bool { return _http.listen_after_bind(); }
    auto bind(const std::string & host, int port) -> bool { return _http.bind_to_port(host, port); }

    auto stop() -> void { _http.stop(); }
    auto wait_until_ready() -> void { _http.wait_until_ready(); }

    auto session_count() -> std::size_t
    {
        std::lock_guard guard(_registry);
        return _sessions.size();
    }

private:
    using Handler = std::function<void(const httplib::Request &, httplib::Response &)>;

    auto now_ms() const -> std::int64_t
    {
        return std::chrono::duration_cast<std::chrono::milliseconds>(analysis::Clock::now().time_since_epoch()).count();
    }

    auto budget() const -> analysis::Budget { return analysis::Budget::for_ms(_config.time_budget_ms); }

    auto new_id(char prefix) -> std::string
    {
        static const char * hex = "0123456789abcdef";
        std::string id(1, prefix);
        for (int i = 0; i < 16; ++i)
            id += hex[_ids() % 16];
        return id;
    }

    auto send(httplib::Response & res, int status, const Json & body) -> void
    {
        res.status = status;
        res.set_content(body.dump(), "application/json");
    }

    /// Wraps a handler: CORS header, JSON error bodies, idle-session eviction.
    auto wrap(Handler h) -> Handler
    {
        return [this, h = std::move(h)](const httplib::Request & req, httplib::Response & res) {
            res.set_header("Access-Control-Allow-Origin", _config.cors_origin);
            evict_idle();
            try {
                h(req, res);
            }
            catch (const detail::HttpError & e) {
                send(res, e.status, e.body);
            }
            catch (const Error & e) {
                send(res, detail::status_for(e.code()), error_json(e.code(), e.what()));
            }
            catch (const Json::exception & e) {
                send(res, 400, error_json("invalid_argument", e.what()));
            }
            catch (const std::exception & e) {
                send(res, 500, error_json("internal", e.what()));
            }
        };
    }

    auto evict_idle() -> void
    {
        auto cutoff = now_ms() - _config.session_ttl.count();
        std::lock_guard guard(_registry);
        std::erase_if(_sessions, [&](const auto & kv) { return kv.second->last_used.load() < cutoff; });
    }

    auto find_model(const std::string & id) -> std::shared_ptr<const detail::ModelEntry>
    {
        std::lock_guard guard(_registry);
        auto it = _models.find(id);
        if (it == _models.end())
            throw detail::HttpError{404, error_json("not_found", "unknown model '" + id + "'")};
        return it->second;
    }

    auto find_session(const std::string & id) -> std::shared_ptr<detail::SessionEntry>
    {
        std::lock_guard guard(_registry);
        auto it = _sessions.find(id);
        if (it == _sessions.end())
            throw detail::HttpError{404, error_json("not_found", "unknown session '" + id + "'")};
        it->second->last_used = now_ms();
        return it->second;
    }

    /// Runs f with exclusive, arrival-ordered access to the session.
    template <typename F>
    auto with_session(const httplib::Request & req, F && f) -> void
    {
        auto entry = find_session(req.path_params.at("id"));
        std::lock_guard<detail::TicketLock> guard(entry->lock);
        if (! entry->session)
            throw detail::HttpError{404, error_json("not_found", "session was deleted")};
        f(*entry->session);
        entry->last_used = now_ms();
    }

    auto mutation(httplib::Response & res, session::Session & s, const session::Outcome & o) -> void
    {
        if (! o.ok()) {
            const auto & c = *o.conflict;
            Json body = error_json("conflict", c.action + " is rejected" + (c.culprit.empty() ? "" : " by " + c.culprit));
            body["error"]["culprit"] = c.culprit;
            body["error"]["variable"] = c.variable;
            body["conflict"] = c.json();
            send(res, 409, body);
            return;
        }
        Json body = o.json();
        body["view"] = s.view(budget()).json();
        send(res, 200, body);
    }

    auto routes() -> void
    {
        _http.Options(R"(.*)", [this](const httplib::Request &, httplib::Response & res) {
            res.set_header("Access-Control-Allow-Origin", _config.cors_origin);
            res.set_header("Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS");
            res.set_header("Access-Control-Allow-Headers", "Content-Type");
            res.status = 204;
        });

        _http.Post("/models", wrap([this](const httplib::Request & req, httplib::Response & res) {
            auto text = detail::string_field(detail::body_of(req), "text");
            auto parsed = fm::parse(text);
            if (! parsed.ok()) {
                Json body = error_json("parse_error", parsed.errors.front().message);
                Json list = Json::array();
                for (const auto & e : parsed.errors)
                    list.push_back(diagnostic_json(e));
                body["error"]["diagnostics"] = list;
                send(res, 400, body);
                return;
            }
            auto entry = std::make_shared<detail::ModelEntry>(detail::ModelEntry{std::move(parsed.model), parsed.diagnostics});
            Json diags = Json::array();
            for (const auto & d : entry->diagnostics)
                diags.push_back(diagnostic_json(d));
            std::string id;
            {
                std::lock_guard guard(_registry);
                id = new_id('m');
                _models.emplace(id, entry);
            }
            send(res, 200, {{"model_id", id}, {"diagnostics", diags}});
        }));

        _http.Get("/models/:id", wrap([this](const httplib::Request & req, httplib::Response & res) {
            auto id = req.path_params.at("id");
            send(res, 200, detail::model_summary(id, *find_model(id)));
        }));

        _http.Post("/models/:id/analyses", wrap([this](const httplib::Request & req, httplib::Response & res) {
            auto entry = find_model(req.path_params.at("id"));
            auto body = detail::body_of(req);
            auto kind = detail::string_field(body, "kind");
            auto params = body.contains("params") ? body["params"] : Json::object();
            send(res, 200, analysis::run(entry->model, kind, params, budget()).json());
        }));

        _http.Post("/sessions", wrap([this](const httplib::Request & req, httplib::Response & res) {
            auto body = detail::body_of(req);
            auto model = find_model(detail::string_field(body, "model_id"));
            session::Options options;
            options.count_cap = _config.view_count_cap;
            auto entry = std::make_shared<detail::SessionEntry>();
            entry->session = std::make_unique<session::Session>(model->model, options);
            if (body.contains("log"))
                entry->session->replay(body["log"]);
            entry->last_used = now_ms();
            Json view = entry->session->view(budget()).json();
            std::string id;
            {
                std::lock_guard guard(_registry);
                id = new_id('s');
                _sessions.emplace(id, entry);
            }
            send(res, 200, {{"session_id", id}, {"view", view}, {"log", entry->session->export_log()}});
        }));

        _http.Get("/sessions/:id", wrap([this](const httplib::Request & req, httplib::Response & res) {
            with_session(req, [&](session::Session & s) {
                send(res, 200, {{"view", s.view(budget()).json()}, {"log", s.export_log()}});
            });
        }));

        _http.Delete("/sessions/:id", wrap([this](const httplib::Request & req, httplib::Response & res) {
            auto id = req.path_params.at("id");
            auto entry = find_session(id);
            {
                std::lock_guard<detail::TicketLock> guard(entry->lock);
                entry->session.reset();
            }
            std::lock_guard guard(_registry);
            _sessions.erase(id);
            res.status = 204;
        }));

        _http.Post("/sessions/:id/decisions", wrap([this](const httplib::Request & req, httplib::Response & res) {
            auto body = detail::body_of(req);
            auto name = detail::string_field(body, "name");
            if (! body.contains("restriction"))
                throw detail::HttpError{400, error_json("invalid_argument", "missing field 'restriction'")};
            auto r = session::Restriction::from_json(body["restriction"]);
            with_session(req, [&](session::Session & s) { mutation(res, s, s.decide(name, r)); });
        }));

        _http.Post("/sessions/:id/constraints", wrap([this](const httplib::Request & req, httplib::Response & res) {
            auto text = detail::string_field(detail::body_of(req), "expr_text");
            with_session(req, [&](session::Session & s) { mutation(res, s, s.add_constraint(text)); });
        }));

        _http.Post("/sessions/:id/undo", wrap([this](const httplib::Request & req, httplib::Response & res) {
            auto body = detail::body_of(req);
            Int k = body.contains("k") ? int_from_json(body["k"]) : 1;
            if (k < 1)
                throw OutOfRange("undo count must be at least 1");
            with_session(req, [&](session::Session & s) { mutation(res, s, s.undo(static_cast<std::size_t>(k))); });
        }));

        _http.Post("/sessions/:id/solutions/next", wrap([this](const httplib::Request & req, httplib::Response & res) {
            with_session(req, [&](session::Session & s) {
                auto solution = s.next_solution(budget());
                if (solution)
                    send(res, 200, {{"solution", solution->json()}});
                else if (s.interrupted())
                    send(res, 200, {{"solution", nullptr}, {"interrupted", true}});
                else
                    res.status = 204;
            });
        }));

        _http.Post("/sessions/:id/optimize", wrap([this](const httplib::Request & req, httplib::Response & res) {
            auto goal = detail::string_field(detail::body_of(req), "goal");
            with_session(req, [&](session::Session & s) { send(res, 200, analysis::goal_json(s.optimize(goal, budget()))); });
        }));
    }

    Config _config;
    httplib::Server _http;
    std::mutex _registry;
    std::mt19937_64 _ids;
    std::unordered_map<std::string, std::shared_ptr<const detail::ModelEntry>> _models;
    std::unordered_map<std::string, std::shared_ptr<detail::SessionEntry>> _sessions;
};

} // namespace featline::service

#endif
