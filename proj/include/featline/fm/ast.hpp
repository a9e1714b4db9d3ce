#ifndef FEATLINE_FM_AST_HPP
#define FEATLINE_FM_AST_HPP

#include <featline/fd/constraint.hpp>
#include <featline/interval_set.hpp>

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace featline::fm {

/// Source position. Spans never take part in structural equality.
struct SourceSpan
{
    std::size_t line = 0;
    std::size_t column = 0;
    std::size_t begin = 0;
    std::size_t end = 0;

    friend auto operator==(const SourceSpan &, const SourceSpan &) -> bool { return true; }
};

struct Diagnostic
{
    std::string code;
    std::string message;
    SourceSpan span;
};

/// One element of an enumerated domain or a relation tuple: an integer or a named code.
struct Literal
{
    std::optional<Int> number;
    std::string code;

    auto operator==(const Literal &) const -> bool = default;
    auto text() const -> std::string { return number ? std::to_string(*number) : code; }
};

struct AttrDomain
{
    bool is_range = true;
    Int lo = 0;
    Int hi = 0;
    std::vector<Literal> values;

    auto operator==(const AttrDomain &) const -> bool = default;
};

struct AttributeDecl
{
    std::string name;
    AttrDomain domain;
    SourceSpan span;

    auto operator==(const AttributeDecl &) const -> bool = default;
};

enum class Edge
{
    Mandatory,
    Optional
};

struct Feature
{
    std::string name;
    Int max_count = 1;
    std::optional<std::string> parent;
    Edge edge = Edge::Mandatory;
    std::vector<AttributeDecl> attributes;
    SourceSpan span;

    auto operator==(const Feature &) const -> bool = default;
    auto is_boolean() const -> bool { return max_count == 1; }
    auto attribute(const std::string & attr) const -> const AttributeDecl *
    {
        for (const auto & a : attributes)
            if (a.name == attr)
                return &a;
        return nullptr;
    }
};

struct Group
{
    std::string parent;
    std::vector<std::string> members;
    Int min = 0;
    Int max = 0;
    SourceSpan span;

    auto operator==(const Group &) const -> bool = default;
};

struct CrossDep
{
    enum class Kind
    {
        Requires,
        Excludes
    };
    enum class Semantics
    {
        Presence,
        PerInstance
    };

    Kind kind = Kind::Requires;
    std::string from;
    std::string to;
    Semantics semantics = Semantics::Presence;
    Int offset = 0;
    SourceSpan span;

    auto operator==(const CrossDep &) const -> bool = default;
};

struct EnumDecl
{
    std::string name;
    std::vector<std::string> codes;
    SourceSpan span;

    auto operator==(const EnumDecl &) const -> bool = default;
};

/// Constraint and goal expressions.
struct Expr
{
    enum class Kind
    {
        Number,
        Name,    // bare identifier: a feature count or an enum code
        AttrRef, // Feature.Attr
        Add,
        Sub,
        Mul,
        Neg,
        Min,
        Max,
        Compare,
        And,
        Or,
        Not,
        Xor,
        Implies,
        Iff,
        AllDifferent,
        AtMost,   // args = list; n, value
        AtLeast,
        Exactly,
        Relation, // args = list; tuples
        Choose    // args = list; n, m
    };

    Kind kind = Kind::Number;
    Int number = 0;
    std::string name;
    std::string attr;
    fd::CmpOp op = fd::CmpOp::Eq;
    std::vector<Expr> args;
    Literal n;
    Literal m;
    std::vector<std::vector<Literal>> tuples;
    SourceSpan span;

    auto operator==(const Expr &) const -> bool = default;

    static auto make(Kind k, std::vector<Expr> args = {}, SourceSpan span = {}) -> Expr
    {
        Expr e;
        e.kind = k;
        e.args = std::move(args);
        e.span = span;
        return e;
    }

    auto is_symbolic() const -> bool
    {
        switch (kind) {
        case Kind::AllDifferent:
        case Kind::AtMost:
        case Kind::AtLeast:
        case Kind::Exactly:
        case Kind::Relation:
        case Kind::Choose: return true;
        default: return false;
        }
    }
    auto is_boolean() const -> bool
    {
        switch (kind) {
        case Kind::Compare:
        case Kind::And:
        case Kind::Or:
        case Kind::Not:
        case Kind::Xor:
        case Kind::Implies:
        case Kind::Iff: return true;
        default: return is_symbolic();
        }
    }
};

struct Goal
{
    fd::Direction direction = fd::Direction::Minimize;
    std::string name;
    Expr expr;
    SourceSpan span;

    auto operator==(const Goal &) const -> bool = default;
};

struct FeatureModel
{
    std::string name;
    std::vector<EnumDecl> enums;
    std::vector<Feature> features;
    std::vector<Group> groups;
    std::vector<CrossDep> cross_deps;
    std::vector<Expr> constraints;
    std::vector<Goal> goals;

    auto operator==(const FeatureModel &) const -> bool = default;

    auto feature(const std::string & n) const -> const Feature *
    {
        for (const auto & f : features)
            if (f.name == n)
                return &f;
        return nullptr;
    }
    auto goal(const std::string & n) const -> const Goal *
    {
        for (const auto & g : goals)
            if (g.name == n)
                return &g;
        return nullptr;
    }
    /// Codes number 0, 1, 2, ... within their enum, in declaration order.
    auto code(const std::string & n) const -> std::optional<Int>
    {
        for (const auto & e : enums)
            for (std::size_t i = 0; i < e.codes.size(); ++i)
                if (e.codes[i] == n)
                    return static_cast<Int>(i);
        return std::nullopt;
    }
    auto root() const -> const Feature *
    {
        for (const auto & f : features)
            if (! f.parent)
                return &f;
        return nullptr;
    }
    auto children(const std::string & parent) const -> std::vector<const Feature *>
    {
        std::vector<const Feature *> out;
        for (const auto & f : features)
            if (f.parent == parent)
                out.push_back(&f);
        return out;
    }
    auto literal_value(const Literal & l) const -> std::optional<Int> { return l.number ? l.number : code(l.code); }

    auto domain_of(const AttributeDecl & a) const -> IntervalSet
    {
        if (a.domain.is_range)
            return IntervalSet::range(a.domain.lo, a.domain.hi);
        std::vector<Int> values;
        for (const auto & l : a.domain.values)
            if (auto v = literal_value(l))
                values.push_back(*v);
        return IntervalSet::of(values);
    }
};

// ---- validation ---------------------------------------------------------

namespace detail {

    class Validator
    {
    public:
        explicit Validator(const FeatureModel & m) : _m(m) {}

        auto take() -> std::vector<Diagnostic> { return std::move(_out); }

        auto run() -> std::vector<Diagnostic>
        {
            names();
            tree();
            groups();
            cross();
            for (const auto & c : _m.constraints)
                constraint(c);
            for (const auto & g : _m.goals)
                goal(g);
            return std::move(_out);
        }

        auto constraint(const Expr & c) -> void
        {
            if (! c.is_boolean())
                report("type-error", "constraint must be a condition, not a number", c.span);
            boolean(c, true);
        }

        auto goal(const Expr & e, const SourceSpan & span) -> void
        {
            if (e.is_boolean())
                report("type-error", "goal must be an arithmetic expression", span);
            else
                arithmetic(e);
        }

    private:
        auto report(std::string code, std::string message, const SourceSpan & span) -> void
        {
            _out.push_back({std::move(code), std::move(message), span});
        }

        auto names() -> void
        {
            std::set<std::string> seen;
            for (const auto & f : _m.features) {
                if (! seen.insert(f.name).second)
                    report("duplicate-name", "feature '" + f.name + "' is declared more than once", f.span);
                if (f.max_count < 1)
                    report("invalid-max", "feature '" + f.name + "' must allow at least one occurrence", f.span);
                std::set<std::string> attrs;
                for (const auto & a : f.attributes) {
                    if (! attrs.insert(a.name).second)
                        report("duplicate-attribute", "attribute '" + f.name + "." + a.name + "' is declared more than once", a.span);
                    domain(f, a);
                }
            }
            std::set<std::string> codes, enums;
            for (const auto & e : _m.enums) {
                if (! enums.insert(e.name).second)
                    report("duplicate-enum", "enum '" + e.name + "' is declared more than once", e.span);
                for (const auto & c : e.codes) {
                    if (! codes.insert(c).second)
                        report("duplicate-code", "code '" + c + "' is declared more than once", e.span);
                    if (seen.count(c))
                        report("ambiguous-name", "'" + c + "' names both a feature and an enum code", e.span);
                }
            }
            std::set<std::string> goals;
            for (const auto & g : _m.goals)
                if (! goals.insert(g.name).second)
                    report("duplicate-goal", "goal '" + g.name + "' is declared more than once", g.span);
        }

        auto domain(const Feature & f, const AttributeDecl & a) -> void
        {
            const auto & d = a.domain;
            if (d.is_range ? d.lo > d.hi : d.values.empty()) {
                report("empty-domain", "attribute '" + f.name + "." + a.name + "' has an empty domain", a.span);
                return;
            }
            for (const auto & l : d.values)
                if (! _m.literal_value(l))
                    report("unknown-code", "unknown code '" + l.code + "' in domain of '" + f.name + "." + a.name + "'", a.span);
        }

        auto tree() -> void
        {
            std::size_t roots = 0;
            for (const auto & f : _m.features) {
                if (! f.parent) {
                    ++roots;
                    if (roots == 1 && f.max_count != 1)
                        report("root-max", "root feature '" + f.name + "' cannot be repeated", f.span);
                    if (roots == 2)
                        report("multiple-roots", "feature '" + f.name + "' has no parent but '" + _m.root()->name + "' is already the root", f.span);
                    continue;
                }
                if (! _m.feature(*f.parent)) {
                    report("unknown-parent", "feature '" + f.name + "' refers to unknown parent '" + *f.parent + "'", f.span);
                    continue;
                }
                // Walk up; a walk longer than the feature count means a cycle.
                const Feature * cur = &f;
                std::size_t steps = 0;
                while (cur && cur->parent && steps <= _m.features.size()) {
                    cur = _m.feature(*cur->parent);
                    ++steps;
                }
                if (steps > _m.features.size())
                    report("cycle", "feature '" + f.name + "' is its own ancestor", f.span);
            }
            if (roots == 0)
                report("no-root", _m.features.empty() ? "model declares no features" : "every feature has a parent; no root", {});
        }

        auto groups() -> void
        {
            for (const auto & g : _m.groups) {
                const auto * p = _m.feature(g.parent);
                if (! p) {
                    report("unknown-feature", "group refers to unknown parent '" + g.parent + "'", g.span);
                    continue;
                }
                if (! p->is_boolean())
                    report("unsupported-group-parent", "group parent '" + g.parent + "' must not be repeatable", g.span);
                if (g.members.size() < 2)
                    report("group-size", "a group needs at least two members", g.span);
                std::set<std::string> seen;
                for (const auto & name : g.members) {
                    const auto * f = _m.feature(name);
                    if (! f) {
                        report("unknown-feature", "group member '" + name + "' is not declared", g.span);
                        continue;
                    }
                    if (! seen.insert(name).second)
                        report("duplicate-member", "group member '" + name + "' is listed twice", g.span);
                    if (f->parent != g.parent)
                        report("not-a-child", "group member '" + name + "' is not a child of '" + g.parent + "'", g.span);
                    if (! f->is_boolean())
                        report("unsupported-group-member", "group member '" + name + "' must not be repeatable", g.span);
                }
                if (g.min < 0 || g.min > g.max || g.max > static_cast<Int>(g.members.size()))
                    report("group-cardinality", "group cardinality [" + std::to_string(g.min) + ".." + std::to_string(g.max) +
                        "] does not fit " + std::to_string(g.members.size()) + " members", g.span);
            }
        }

        auto cross() -> void
        {
            for (const auto & d : _m.cross_deps) {
                for (const auto * n : {&d.from, &d.to})
                    if (! _m.feature(*n))
                        report("unknown-feature", "unknown feature '" + *n + "'", d.span);
                if (d.from == d.to)
                    report("self-dependency", "feature '" + d.from + "' cannot depend on itself", d.span);
                if (d.kind == CrossDep::Kind::Excludes && d.semantics == CrossDep::Semantics::PerInstance)
                    report("unsupported-per-instance", "'per instance' applies to requires only", d.span);
            }
        }

        auto reference(const Expr & e) -> void
        {
            if (e.kind == Expr::Kind::Name) {
                if (! _m.feature(e.name) && ! _m.code(e.name))
                    report("unknown-name", "unknown feature or code '" + e.name + "'", e.span);
                return;
            }
            const auto * f = _m.feature(e.name);
            if (! f)
                report("unknown-feature", "unknown feature '" + e.name + "'", e.span);
            else if (! f->attribute(e.attr))
                report("unknown-attribute", "feature '" + e.name + "' has no attribute '" + e.attr + "'", e.span);
        }

        auto literal(const Literal & l, const SourceSpan & span) -> void
        {
            if (! _m.literal_value(l))
                report("unknown-code", "unknown code '" + l.code + "'", span);
        }

        auto variable_list(const Expr & e) -> void
        {
            for (const auto & a : e.args) {
                if (a.kind == Expr::Kind::AttrRef || (a.kind == Expr::Kind::Name && ! _m.code(a.name)))
                    reference(a);
                else
                    report("type-error", "expected a feature or attribute reference", a.span);
            }
        }

        auto arithmetic(const Expr & e) -> void
        {
            using K = Expr::Kind;
            switch (e.kind) {
            case K::Number: return;
            case K::Name:
            case K::AttrRef: reference(e); return;
            case K::Add:
            case K::Sub:
            case K::Mul:
            case K::Neg:
            case K::Min:
            case K::Max:
                for (const auto & a : e.args)
                    arithmetic(a);
                return;
            default: report("type-error", "expected a number, found a condition", e.span);
            }
        }

        /// top: still in the flattened top-level conjunction.
        auto boolean(const Expr & e, bool top) -> void
        {
            using K = Expr::Kind;
            switch (e.kind) {
            case K::Compare:
                for (const auto & a : e.args)
                    arithmetic(a);
                return;
            case K::And:
                for (const auto & a : e.args)
                    boolean(a, top);
                return;
            case K::Or:
            case K::Not:
            case K::Xor:
            case K::Implies:
            case K::Iff:
                for (const auto & a : e.args)
                    boolean(a, false);
                return;
            case K::AllDifferent:
            case K::AtMost:
            case K::AtLeast:
            case K::Exactly:
            case K::Relation:
            case K::Choose:
                if (! top)
                    report("not-reifiable", "symbolic constraints may only appear at top level or under 'and'", e.span);
                symbolic(e);
                return;
            default: report("type-error", "expected a condition, found a number", e.span);
            }
        }

        auto symbolic(const Expr & e) -> void
        {
            using K = Expr::Kind;
            variable_list(e);
            if (e.kind == K::AtMost || e.kind == K::AtLeast || e.kind == K::Exactly || e.kind == K::Choose) {
                literal(e.n, e.span);
                literal(e.m, e.span);
                auto n = _m.literal_value(e.n);
                if (n && *n < 0)
                    report("invalid-count", "count bound must be non-negative", e.span);
                if (e.kind == K::Choose) {
                    auto m = _m.literal_value(e.m);
                    if (n && m && *n > *m)
                        report("invalid-count", "choose needs n <= m", e.span);
                }
            }
            if (e.kind == K::Relation)
                for (const auto & t : e.tuples) {
                    if (t.size() != e.args.size())
                        report("arity-mismatch", "relation tuple has " + std::to_string(t.size()) + " values for " +
                            std::to_string(e.args.size()) + " references", e.span);
                    for (const auto & l : t)
                        literal(l, e.span);
                }
        }

    public:
        auto goal(const Goal & g) -> void { goal(g.expr, g.span); }

    private:
        const FeatureModel & _m;
        std::vector<Diagnostic> _out;
    };

} // namespace detail

/// Every structural violation, in a stable order. Empty means valid.
inline auto validate_model(const FeatureModel & m) -> std::vector<Diagnostic>
{
    return detail::Validator(m).run();
}

/// Checks a free-standing constraint expression against m.
inline auto check_constraint(const FeatureModel & m, const Expr & e) -> std::vector<Diagnostic>
{
    detail::Validator v(m);
    v.constraint(e);
    return v.take();
}

} // namespace featline::fm

#endif
