#ifndef FEATLINE_ANALYSES_HPP
#define FEATLINE_ANALYSES_HPP

#include <featline/fm/compile.hpp>
#include <featline/json.hpp>

#include <chrono>
#include <map>
#include <set>

namespace featline::analysis {

using Clock = std::chrono::steady_clock;

/// Bounds a long-running analysis. Both parts are optional.
struct Budget
{
    std::optional<Clock::time_point> deadline;
    std::function<bool()> cancelled;

    static auto unlimited() -> Budget { return {}; }
    static auto for_ms(std::int64_t ms) -> Budget { return {Clock::now() + std::chrono::milliseconds(ms), {}}; }

    auto stop_predicate() const -> std::function<bool()>
    {
        if (! deadline && ! cancelled)
            return {};
        return [d = deadline, c = cancelled] { return (d && Clock::now() >= *d) || (c && c()); };
    }
};

enum class Projection
{
    All,
    Features
};

/// Values of every model variable, in declaration order.
struct Configuration
{
    std::vector<std::pair<std::string, Int>> values;

    auto operator==(const Configuration &) const -> bool = default;

    auto at(const std::string & name) const -> Int
    {
        for (const auto & [n, v] : values)
            if (n == name)
                return v;
        throw UnknownName("unknown variable '" + name + "'");
    }

    auto json() const -> Json
    {
        Json out = Json::object();
        for (const auto & [n, v] : values)
            out[n] = int_json(v);
        return out;
    }
};

inline auto configuration_of(const fm::VarMap & vm, const fd::Solution & s) -> Configuration
{
    Configuration c;
    for (const auto & v : vm.model_vars)
        c.values.emplace_back(v.name, s[v]);
    return c;
}

inline auto search_options(const fm::CompiledModel & c, fd::Strategy strategy, const Budget & budget,
    Projection projection = Projection::All) -> fd::SearchOptions
{
    fd::SearchOptions o;
    o.strategy = strategy;
    o.branch_vars = projection == Projection::Features ? c.vars.feature_vars : c.vars.model_vars;
    o.should_stop = budget.stop_predicate();
    return o;
}

inline auto is_void(const fm::FeatureModel & m) -> bool
{
    auto c = fm::compile(m);
    return ! fd::solve(c.store, search_options(c, {}, {}));
}

struct CoreDead
{
    std::vector<std::string> core;
    std::vector<std::string> dead;
    /// False when the budget ran out before every feature was classified.
    bool complete = true;
};

/**
 * Classifies each feature with at most two probes on a pushed level:
 * f >= 1 unsatisfiable means dead, f = 0 unsatisfiable means core. Every
 * solution found along the way is a witness that rules out later probes.
 */
inline auto core_and_dead(const fm::FeatureModel & m, const Budget & budget = {}) -> CoreDead
{
    auto c = fm::compile(m);
    auto & store = c.store;
    auto options = search_options(c, {}, budget);
    const auto & features = c.vars.feature_vars;
    std::vector<bool> seen_in(features.size()), seen_out(features.size());
    auto witness = [&](const fd::Solution & s) {
        for (std::size_t i = 0; i < features.size(); ++i)
            (s[features[i]] > 0 ? seen_in : seen_out)[i] = true;
    };

    CoreDead out;
    {
        fd::Search first(store, options);
        auto s = first.next();
        if (! s) {
            if (first.interrupted()) {
                out.complete = false;
                return out;
            }
            throw VoidModel("model '" + m.name + "' has no valid configuration");
        }
        witness(*s);
    }

    // Returns whether a solution exists with the feature restricted; nullopt when interrupted.
    auto probe = [&](std::uint32_t var, const IntervalSet & allowed) -> std::optional<bool> {
        auto level = store.push_level();
        std::optional<bool> found = false;
        if (store.restrict_domain(var, allowed) && store.propagate() == fd::Status::Consistent) {
            fd::Search search(store, options);
            if (auto s = search.next()) {
                witness(*s);
                found = true;
            }
            else if (search.interrupted())
                found = std::nullopt;
        }
        store.pop_to(level);
        return found;
    };

    for (std::size_t i = 0; i < features.size(); ++i) {
        auto v = features[i].index;
        if (! seen_in[i]) {
            auto r = probe(v, IntervalSet::range(1, store.domain(v).max()));
            if (! r)
                out.complete = false;
            else if (! *r)
                out.dead.push_back(features[i].name);
        }
        if (! seen_out[i]) {
            auto r = probe(v, IntervalSet::singleton(0));
            if (! r)
                out.complete = false;
            else if (! *r)
                out.core.push_back(features[i].name);
        }
    }
    return out;
}

inline auto count_configurations(const fm::FeatureModel & m, std::uint64_t cap, Projection projection = Projection::All,
    const Budget & budget = {}) -> fd::CountResult
{
    auto c = fm::compile(m);
    return fd::count_solutions(c.store, cap, search_options(c, {}, budget, projection));
}

struct Enumeration
{
    std::vector<Configuration> solutions;
    /// True when every solution was listed.
    bool complete = false;
};

inline auto enumerate(const fm::FeatureModel & m, std::uint64_t limit, fd::Strategy strategy = {}, const Budget & budget = {})
    -> Enumeration
{
    if (limit == 0)
        throw InvalidArgument("enumeration limit must be at least 1");
    auto c = fm::compile(m);
    fd::Search search(c.store, search_options(c, strategy, budget));
    Enumeration out;
    while (out.solutions.size() < limit) {
        auto s = search.next();
        if (! s) {
            out.complete = search.exhausted();
            return out;
        }
        out.solutions.push_back(configuration_of(c.vars, *s));
    }
    out.complete = ! search.next() && search.exhausted();
    return out;
}

inline auto first_configuration(const fm::FeatureModel & m, fd::Strategy strategy = {}, const Budget & budget = {})
    -> std::optional<Configuration>
{
    auto c = fm::compile(m);
    if (auto s = fd::solve(c.store, search_options(c, strategy, budget)))
        return configuration_of(c.vars, *s);
    return std::nullopt;
}

struct GoalResult
{
    std::string goal;
    fd::Direction direction = fd::Direction::Minimize;
    Configuration solution;
    Int value = 0;
    bool proven = true;
};

inline auto optimize_goal(const fm::FeatureModel & m, const std::string & goal, fd::Strategy strategy = {},
    const Budget & budget = {}) -> GoalResult
{
    const auto * g = m.goal(goal);
    if (! g)
        throw UnknownGoal("no goal named '" + goal + "'");
    auto c = fm::compile(m);
    auto best = fd::optimize(c.store, c.vars.goals.at(goal), g->direction, search_options(c, strategy, budget));
    return {goal, g->direction, configuration_of(c.vars, best.solution), best.value, best.proven};
}

/**
 * Checks a total assignment by ground evaluation of every compiled
 * constraint. Returns the labels of the violated ones (empty means valid).
 */
inline auto validate_configuration(const fm::FeatureModel & m, const std::map<std::string, Int> & assignment)
    -> std::vector<std::string>
{
    auto c = fm::compile(m);
    const auto & store = c.store;
    std::vector<Int> values(store.num_vars());
    for (std::uint32_t v = 0; v < store.num_vars(); ++v)
        values[v] = store.initial_domain(v).min();
    for (const auto & [name, value] : assignment) {
        auto v = c.vars.find(name);
        if (! v)
            throw UnknownName("unknown variable '" + name + "'");
        values[v->index] = value;
    }
    std::vector<std::string> violations;
    for (const auto & v : c.vars.model_vars) {
        if (! assignment.count(v.name))
            throw InvalidArgument("the assignment has no value for '" + v.name + "'");
        if (! store.initial_domain(v.index).contains(values[v.index]))
            violations.push_back(v.name + " in " + store.initial_domain(v.index).to_string());
    }
    std::set<std::string> reported;
    for (const auto & e : store.constraints()) {
        bool ok = false;
        try {
            ok = fd::holds(e.source, values);
        }
        catch (const IntegerOverflow &) {
        }
        if (! ok && reported.insert(e.label).second)
            violations.push_back(e.label);
    }
    return violations;
}

// ---- reports ---------------------------------------------------------------

inline auto direction_name(fd::Direction d) -> const char * { return d == fd::Direction::Minimize ? "minimize" : "maximize"; }

inline auto parse_var_order(const std::string & s) -> fd::VarOrder
{
    if (s == "declaration")
        return fd::VarOrder::DeclarationOrder;
    if (s == "first-fail")
        return fd::VarOrder::FirstFail;
    throw InvalidArgument("unknown variable order '" + s + "' (declaration, first-fail)");
}

inline auto parse_value_order(const std::string & s) -> fd::ValueOrder
{
    if (s == "ascending")
        return fd::ValueOrder::Ascending;
    if (s == "descending")
        return fd::ValueOrder::Descending;
    throw InvalidArgument("unknown value order '" + s + "' (ascending, descending)");
}

inline auto parse_projection(const std::string & s) -> Projection
{
    if (s == "all")
        return Projection::All;
    if (s == "features")
        return Projection::Features;
    throw InvalidArgument("unknown projection '" + s + "' (all, features)");
}

inline constexpr std::uint64_t default_count_cap = 1'000'000;

struct AnalysisReport
{
    std::string kind;
    Json result;
    double elapsed_ms = 0;

    /// elapsed_ms is left out when timing is false, making the document reproducible.
    auto json(bool timing = true) const -> Json
    {
        Json out = {{"kind", kind}, {"result", result}};
        if (timing)
            out["elapsed_ms"] = elapsed_ms;
        return out;
    }
};

inline auto goal_json(const GoalResult & r) -> Json
{
    return {{"goal", r.goal}, {"direction", direction_name(r.direction)}, {"value", int_json(r.value)},
        {"proven", r.proven}, {"solution", r.solution.json()}};
}

namespace detail {
    inline auto param_string(const Json & p, const char * key, const std::string & fallback) -> std::string
    {
        if (! p.contains(key))
            return fallback;
        if (! p[key].is_string())
            throw InvalidArgument(std::string("parameter '") + key + "' must be a string");
        return p[key].get<std::string>();
    }

    inline auto param_count(const Json & p, const char * key, std::uint64_t fallback) -> std::uint64_t
    {
        if (! p.contains(key))
            return fallback;
        Int v = int_from_json(p[key]);
        if (v < 1)
            throw InvalidArgument(std::string("parameter '") + key + "' must be at least 1");
        return static_cast<std::uint64_t>(v);
    }

    inline auto param_strategy(const Json & p) -> fd::Strategy
    {
        return {parse_var_order(param_string(p, "var_order", "declaration")),
            parse_value_order(param_string(p, "value_order", "ascending"))};
    }
}

/**
 * Runs one analysis by name. Kinds and their parameters:
 *   void; core_dead; count {cap, project}; enumerate {limit, var_order,
 *   value_order}; solve {var_order, value_order}; optimize {goal, var_order,
 *   value_order}; validate {assignment}.
 */
inline auto run(const fm::FeatureModel & m, const std::string & kind, const Json & params = Json::object(),
    const Budget & budget = {}) -> AnalysisReport
{
    auto start = Clock::now();
    const Json & p = params.is_null() ? Json::object() : params;
    if (! p.is_object())
        throw InvalidArgument("analysis parameters must be an object");
    AnalysisReport r{kind, Json::object(), 0};
    if (kind == "void")
        r.result = {{"void", is_void(m)}};
    else if (kind == "core_dead") {
        auto cd = core_and_dead(m, budget);
        r.result = {{"core", cd.core}, {"dead", cd.dead}, {"complete", cd.complete}};
    }
    else if (kind == "count") {
        auto projection = parse_projection(detail::param_string(p, "project", "all"));
        auto n = count_configurations(m, detail::param_count(p, "cap", default_count_cap), projection, budget);
        r.result = {{"count", int_json(static_cast<Int>(n.count))}, {"exact", n.exact},
            {"projection", projection == Projection::All ? "all" : "features"}};
    }
    else if (kind == "enumerate") {
        auto e = enumerate(m, detail::param_count(p, "limit", 10), detail::param_strategy(p), budget);
        Json list = Json::array();
        for (const auto & s : e.solutions)
            list.push_back(s.json());
        r.result = {{"solutions", list}, {"complete", e.complete}};
    }
    else if (kind == "solve") {
        auto s = first_configuration(m, detail::param_strategy(p), budget);
        r.result = {{"solution", s ? s->json() : Json(nullptr)}};
    }
    else if (kind == "optimize") {
        if (! p.contains("goal"))
            throw InvalidArgument("optimize needs a 'goal' parameter");
        r.result = goal_json(optimize_goal(m, detail::param_string(p, "goal", ""), detail::param_strategy(p), budget));
    }
    else if (kind == "validate") {
        if (! p.contains("assignment") || ! p["assignment"].is_object())
            throw InvalidArgument("validate needs an 'assignment' object");
        std::map<std::string, Int> a;
        for (const auto & [name, value] : p["assignment"].items())
            a[name] = int_from_json(value);
        auto v = validate_configuration(m, a);
        r.result = {{"ok", v.empty()}, {"violations", v}};
    }
    else
        throw InvalidArgument("unknown analysis kind '" + kind + "'");
    r.elapsed_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
    return r;
}

} // namespace featline::analysis

#endif
