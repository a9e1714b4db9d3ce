#ifndef FEATLINE_SESSION_HPP
#define FEATLINE_SESSION_HPP

#include <featline/analyses.hpp>

#include <limits>
#include <memory>

namespace featline::session {

struct Restriction
{
    enum class Kind
    {
        Fix,
        AtLeast,
        AtMost,
        In
    };

    Kind kind = Kind::Fix;
    Int value = 0;
    IntervalSet domain; // used by In

    static auto fix(Int v) -> Restriction { return {Kind::Fix, v, {}}; }
    static auto at_least(Int v) -> Restriction { return {Kind::AtLeast, v, {}}; }
    static auto at_most(Int v) -> Restriction { return {Kind::AtMost, v, {}}; }
    static auto in(IntervalSet d) -> Restriction { return {Kind::In, 0, std::move(d)}; }

    auto operator==(const Restriction &) const -> bool = default;

    auto allowed() const -> IntervalSet
    {
        switch (kind) {
        case Kind::Fix: return IntervalSet::singleton(value);
        case Kind::AtLeast: return IntervalSet::range(value, std::numeric_limits<Int>::max());
        case Kind::AtMost: return IntervalSet::range(std::numeric_limits<Int>::min(), value);
        case Kind::In: return domain;
        }
        return {};
    }

    auto to_string() const -> std::string
    {
        switch (kind) {
        case Kind::Fix: return "= " + std::to_string(value);
        case Kind::AtLeast: return ">= " + std::to_string(value);
        case Kind::AtMost: return "<= " + std::to_string(value);
        case Kind::In: return "in " + domain.to_string();
        }
        return {};
    }

    auto json() const -> Json
    {
        switch (kind) {
        case Kind::Fix: return {{"kind", "fix"}, {"value", int_json(value)}};
        case Kind::AtLeast: return {{"kind", "at_least"}, {"value", int_json(value)}};
        case Kind::AtMost: return {{"kind", "at_most"}, {"value", int_json(value)}};
        case Kind::In: return {{"kind", "in"}, {"domain", domain_json(domain)}};
        }
        return {};
    }

    static auto from_json(const Json & j) -> Restriction
    {
        if (! j.is_object() || ! j.contains("kind") || ! j["kind"].is_string())
            throw InvalidArgument("a restriction is an object with a 'kind'");
        auto k = j["kind"].get<std::string>();
        if (k == "in") {
            if (! j.contains("domain"))
                throw InvalidArgument("restriction 'in' needs a 'domain'");
            return in(domain_from_json(j["domain"]));
        }
        if (! j.contains("value"))
            throw InvalidArgument("restriction '" + k + "' needs a 'value'");
        Int v = int_from_json(j["value"]);
        if (k == "fix")
            return fix(v);
        if (k == "at_least")
            return at_least(v);
        if (k == "at_most")
            return at_most(v);
        throw InvalidArgument("unknown restriction kind '" + k + "' (fix, at_least, at_most, in)");
    }
};

/// One staged action: a decision on a variable or a configure-time constraint.
struct LogEntry
{
    enum class Kind
    {
        Decide,
        Constraint
    };

    Kind kind = Kind::Decide;
    std::string name;        // Decide
    Restriction restriction; // Decide
    std::string expr;        // Constraint, canonical text

    auto operator==(const LogEntry &) const -> bool = default;

    auto describe() const -> std::string
    {
        return kind == Kind::Decide ? "decide " + name + " " + restriction.to_string() : "constraint " + expr;
    }

    auto json() const -> Json
    {
        if (kind == Kind::Decide)
            return {{"kind", "decide"}, {"name", name}, {"restriction", restriction.json()}};
        return {{"kind", "constraint"}, {"expr", expr}};
    }

    static auto from_json(const Json & j) -> LogEntry
    {
        if (! j.is_object() || ! j.contains("kind"))
            throw InvalidArgument("a log entry is an object with a 'kind'");
        auto k = j["kind"].get<std::string>();
        if (k == "decide") {
            if (! j.contains("name") || ! j["name"].is_string() || ! j.contains("restriction"))
                throw InvalidArgument("a decide entry needs 'name' and 'restriction'");
            return {Kind::Decide, j["name"].get<std::string>(), Restriction::from_json(j["restriction"]), {}};
        }
        if (k == "constraint") {
            if (! j.contains("expr") || ! j["expr"].is_string())
                throw InvalidArgument("a constraint entry needs 'expr'");
            return {Kind::Constraint, {}, {}, j["expr"].get<std::string>()};
        }
        throw InvalidArgument("unknown log entry kind '" + k + "'");
    }
};

enum class Status
{
    ForcedIn,
    ForcedOut,
    Fixed,
    Open
};

inline auto status_name(Status s) -> const char *
{
    switch (s) {
    case Status::ForcedIn: return "forced_in";
    case Status::ForcedOut: return "forced_out";
    case Status::Fixed: return "fixed";
    case Status::Open: return "open";
    }
    return "open";
}

struct VarView
{
    std::string name;
    bool is_feature = false;
    IntervalSet domain;

    auto operator==(const VarView &) const -> bool = default;

    /// Presence wins for features, so a feature fixed to 1 is ForcedIn; attributes are only Fixed or Open.
    auto status() const -> Status
    {
        if (is_feature && domain == IntervalSet::singleton(0))
            return Status::ForcedOut;
        if (is_feature && domain.min() >= 1)
            return Status::ForcedIn;
        if (domain.is_singleton())
            return Status::Fixed;
        return Status::Open;
    }

    auto json() const -> Json
    {
        Json out = {{"name", name}, {"kind", is_feature ? "feature" : "attribute"}, {"domain", domain_json(domain)},
            {"status", status_name(status())}};
        if (domain.is_singleton())
            out["value"] = int_json(domain.min());
        return out;
    }
};

struct Conflict
{
    std::string action;
    /// Label of the constraint whose filtering emptied a domain; empty when none applies.
    std::string culprit;
    std::string variable;

    auto json() const -> Json { return {{"action", action}, {"culprit", culprit}, {"variable", variable}}; }
};

/// Result of a mutating call: the changed variables, or the conflict that rejected it.
struct Outcome
{
    std::vector<VarView> delta;
    std::optional<Conflict> conflict;

    auto ok() const -> bool { return ! conflict; }

    auto json() const -> Json
    {
        if (conflict)
            return {{"conflict", conflict->json()}};
        Json d = Json::array();
        for (const auto & v : delta)
            d.push_back(v.json());
        return {{"delta", d}};
    }
};

struct View
{
    std::vector<VarView> vars;
    fd::CountResult remaining;

    auto json() const -> Json
    {
        Json list = Json::array();
        for (const auto & v : vars)
            list.push_back(v.json());
        return {{"vars", list}, {"remaining", {{"count", int_json(static_cast<Int>(remaining.count))}, {"exact", remaining.exact}}}};
    }
};

inline constexpr std::uint64_t default_view_cap = 10'000;

struct Options
{
    std::uint64_t count_cap = default_view_cap;
    fd::Strategy strategy;
};

/**
 * Interactive configuration over one compiled model. Every log entry owns
 * one store level; undo pops levels, so domains return exactly to their
 * earlier state. Rejected actions leave the store untouched.
 */
class Session
{
public:
    /// Throws CompileError for an invalid model and VoidModel when it has no configuration.
    explicit Session(fm::FeatureModel model, Options options = {}) :
        _model(std::move(model)),
        _compiled(fm::compile(_model)),
        _options(options)
    {
        auto & s = _compiled.store;
        if (s.status() == fd::Status::Failed || ! fd::solve(s, search_options({})))
            throw VoidModel("model '" + _model.name + "' has no valid configuration");
    }

    Session(const Session &) = delete;
    auto operator=(const Session &) -> Session & = delete;

    auto model() const -> const fm::FeatureModel & { return _model; }
    auto log() const -> const std::vector<LogEntry> & { return _log; }
    auto store() const -> const fd::Store & { return _compiled.store; }
    auto vars() const -> const fm::VarMap & { return _compiled.vars; }

    auto decide(const std::string & name, const Restriction & r) -> Outcome
    {
        auto v = _compiled.vars.find(name);
        if (! v)
            throw UnknownName("unknown variable '" + name + "'");
        LogEntry entry{LogEntry::Kind::Decide, name, r, {}};
        return apply(entry, [&](fd::Store & s) { return s.restrict_domain(v->index, r.allowed()) && s.propagate() == fd::Status::Consistent; });
    }

    /// Parses, type-checks and posts a configure-time constraint.
    auto add_constraint(const std::string & text) -> Outcome
    {
        auto parsed = fm::parse_expression(text);
        if (! parsed.ok())
            throw ParseError(parsed.errors.front().message);
        return add_constraint(parsed.expr);
    }

    auto add_constraint(const fm::Expr & e) -> Outcome
    {
        for (const auto & d : fm::check_constraint(_model, e)) {
            if (d.code == "not-reifiable")
                throw NotReifiable(d.message);
            throw TypeError(d.message);
        }
        LogEntry entry{LogEntry::Kind::Constraint, {}, {}, fm::to_text(e)};
        return apply(entry, [&](fd::Store & s) {
            fm::post_constraint(_model, _compiled.vars, s, e);
            return s.status() == fd::Status::Consistent;
        });
    }

    /// Removes the last k log entries.
    auto undo(std::size_t k) -> Outcome
    {
        if (k < 1 || k > _log.size())
            throw OutOfRange("cannot undo " + std::to_string(k) + " of " + std::to_string(_log.size()) + " entries");
        auto before = _compiled.store.domains();
        _compiled.store.pop_to(_levels[_log.size() - k]);
        _log.resize(_log.size() - k);
        _levels.resize(_log.size());
        invalidate();
        return {delta(before), std::nullopt};
    }

    /// Next solution of the current store; nullopt once exhausted or interrupted
    /// (see interrupted()). Any log change restarts the iteration.
    auto next_solution(const analysis::Budget & budget = {}) -> std::optional<analysis::Configuration>
    {
        _interrupted = false;
        if (_iteration && _iteration->exhausted)
            return std::nullopt;
        _stop = budget.stop_predicate();
        std::optional<fd::Solution> s;
        try {
            s = advance();
        }
        catch (...) {
            _stop = {};
            throw;
        }
        _stop = {};
        if (! s)
            return std::nullopt;
        return analysis::configuration_of(_compiled.vars, *s);
    }

    /// Whether the last next_solution call stopped on its budget rather than exhaustion.
    auto interrupted() const -> bool { return _interrupted; }

    auto vars_view() const -> std::vector<VarView>
    {
        std::vector<VarView> out;
        for (const auto & v : _compiled.vars.model_vars)
            out.push_back(var_view(v.index));
        return out;
    }

    /// Variables with their statuses plus the capped count of remaining configurations.
    auto view(const analysis::Budget & budget = {}) -> View
    {
        if (! _remaining) {
            _stop = budget.stop_predicate();
            auto n = fd::count_solutions(_compiled.store, _options.count_cap, search_options({}));
            _stop = {};
            if (! n.exact && n.count < _options.count_cap)
                return {vars_view(), n}; // budget hit; do not cache a partial count
            _remaining = n;
        }
        return {vars_view(), *_remaining};
    }

    /// Optimum of a declared goal under the current decisions. The log is unchanged.
    auto optimize(const std::string & goal, const analysis::Budget & budget = {}) -> analysis::GoalResult
    {
        const auto * g = _model.goal(goal);
        if (! g)
            throw UnknownGoal("no goal named '" + goal + "'");
        _stop = budget.stop_predicate();
        try {
            auto best = fd::optimize(_compiled.store, _compiled.vars.goals.at(goal), g->direction, search_options({}));
            _stop = {};
            return {goal, g->direction, analysis::configuration_of(_compiled.vars, best.solution), best.value, best.proven};
        }
        catch (...) {
            _stop = {};
            throw;
        }
    }

    auto export_log() const -> Json
    {
        Json out = Json::array();
        for (const auto & e : _log)
            out.push_back(e.json());
        return out;
    }

    /// Applies one logged entry; a rejected entry throws InvalidArgument.
    auto replay(const LogEntry & e) -> Outcome
    {
        auto r = e.kind == LogEntry::Kind::Decide ? decide(e.name, e.restriction) : add_constraint(e.expr);
        if (! r.ok())
            throw InvalidArgument("log entry '" + e.describe() + "' is rejected: " + r.conflict->culprit);
        return r;
    }

    auto replay(const Json & log) -> void
    {
        if (! log.is_array())
            throw InvalidArgument("a decision log is a JSON array");
        for (const auto & j : log)
            replay(LogEntry::from_json(j));
    }

private:
    struct Iteration
    {
        fd::Store store;
        std::unique_ptr<fd::Search> search;
        bool exhausted = false;
    };

    /// Interrupted searches stay open, so the next call resumes them.
    auto advance() -> std::optional<fd::Solution>
    {
        if (! _iteration) {
            _iteration = std::make_unique<Iteration>();
            _iteration->store = _compiled.store;
            _iteration->search = std::make_unique<fd::Search>(_iteration->store, search_options({}));
        }
        auto s = _iteration->search->next();
        if (! s) {
            if (_iteration->search->interrupted())
                _interrupted = true;
            else
                _iteration->exhausted = true;
        }
        return s;
    }

    auto search_options(fd::SearchOptions o) const -> fd::SearchOptions
    {
        o.strategy = _options.strategy;
        o.branch_vars = _compiled.vars.model_vars;
        o.should_stop = [this] { return _stop && _stop(); };
        return o;
    }

    auto var_view(std::uint32_t v) const -> VarView
    {
        const auto & s = _compiled.store;
        return {s.name(v), v < _is_feature().size() && _is_feature()[v], s.domain(v)};
    }

    auto _is_feature() const -> const std::vector<bool> &
    {
        if (_feature_flags.empty()) {
            _feature_flags.assign(_compiled.store.num_vars(), false);
            for (const auto & f : _compiled.vars.feature_vars)
                _feature_flags[f.index] = true;
        }
        return _feature_flags;
    }

    auto delta(const std::vector<IntervalSet> & before) const -> std::vector<VarView>
    {
        std::vector<VarView> out;
        for (const auto & v : _compiled.vars.model_vars)
            if (before[v.index] != _compiled.store.domain(v.index))
                out.push_back(var_view(v.index));
        return out;
    }

    auto invalidate() -> void
    {
        _iteration.reset();
        _remaining.reset();
    }

    template <typename F>
    auto apply(const LogEntry & entry, F && act) -> Outcome
    {
        auto & s = _compiled.store;
        auto before = s.domains();
        auto level = s.push_level();
        bool ok = false;
        try {
            ok = act(s);
        }
        catch (...) {
            s.pop_to(level);
            throw;
        }
        if (! ok) {
            Conflict c{entry.describe(), {}, {}};
            if (const auto & f = s.failure()) {
                c.variable = s.name(f->var);
                auto culprit = f->constraint ? f->constraint : s.last_narrower(f->var);
                if (culprit)
                    c.culprit = s.constraints().at(*culprit).label;
            }
            s.pop_to(level);
            return {{}, c};
        }
        _log.push_back(entry);
        _levels.push_back(level);
        invalidate();
        return {delta(before), std::nullopt};
    }

    fm::FeatureModel _model;
    fm::CompiledModel _compiled;
    Options _options;
    std::vector<LogEntry> _log;
    std::vector<fd::LevelId> _levels;
    std::unique_ptr<Iteration> _iteration;
    std::optional<fd::CountResult> _remaining;
    std::function<bool()> _stop;
    bool _interrupted = false;
    mutable std::vector<bool> _feature_flags;
};

} // namespace featline::session

#endif
