#ifndef FEATLINE_FM_COMPILE_HPP
#define FEATLINE_FM_COMPILE_HPP

#include <featline/fd/search.hpp>
#include <featline/fm/parser.hpp>

#include <map>
#include <sstream>

namespace featline::fm {

/// Model names to store variables. Feature variables hold occurrence counts.
struct VarMap
{
    /// Every model variable in store order: each feature followed by its attributes.
    std::vector<fd::VarRef> model_vars;
    std::vector<fd::VarRef> feature_vars;
    std::map<std::string, fd::VarRef> by_name; // "Feature" or "Feature.Attr"
    std::map<std::string, fd::NumExpr> goals;

    auto find(const std::string & name) const -> std::optional<fd::VarRef>
    {
        auto it = by_name.find(name);
        if (it == by_name.end())
            return std::nullopt;
        return it->second;
    }
    auto feature(const std::string & name) const -> fd::VarRef
    {
        auto v = find(name);
        if (! v)
            throw UnknownName("unknown feature '" + name + "'");
        return *v;
    }
    auto attribute(const std::string & f, const std::string & a) const -> fd::VarRef
    {
        auto v = find(f + "." + a);
        if (! v)
            throw UnknownName("unknown attribute '" + f + "." + a + "'");
        return *v;
    }
};

struct CompiledModel
{
    fd::Store store;
    VarMap vars;
};

namespace detail {

    inline auto var(const fd::VarRef & v) -> fd::NumExpr { return fd::NumExpr::var(v); }
    inline auto lit(Int v) -> fd::NumExpr { return fd::NumExpr::constant(v); }
    inline auto atom(fd::NumExpr l, fd::CmpOp op, fd::NumExpr r) -> fd::BoolForm
    {
        return fd::BoolForm::atom(fd::Cmp{std::move(l), op, std::move(r)});
    }

    /// Lowers expressions of one model against its VarMap.
    class Lowering
    {
    public:
        Lowering(const FeatureModel & m, const VarMap & vm) : _m(m), _vm(vm) {}

        auto arith(const Expr & e) const -> fd::NumExpr
        {
            using K = Expr::Kind;
            switch (e.kind) {
            case K::Number: return lit(e.number);
            case K::Name: {
                if (auto v = _vm.find(e.name); v && _m.feature(e.name))
                    return var(*v);
                if (auto c = _m.code(e.name))
                    return lit(*c);
                throw TypeError("unknown feature or code '" + e.name + "'");
            }
            case K::AttrRef: {
                auto v = _vm.find(e.name + "." + e.attr);
                if (! v)
                    throw TypeError("unknown attribute '" + e.name + "." + e.attr + "'");
                return var(*v);
            }
            case K::Add: return arith(e.args[0]) + arith(e.args[1]);
            case K::Sub: return arith(e.args[0]) - arith(e.args[1]);
            case K::Mul: return arith(e.args[0]) * arith(e.args[1]);
            case K::Neg: return -1 * arith(e.args[0]);
            case K::Min:
            case K::Max: {
                std::vector<fd::NumExpr> parts;
                for (const auto & a : e.args)
                    parts.push_back(arith(a));
                return e.kind == K::Min ? fd::NumExpr::min_of(std::move(parts)) : fd::NumExpr::max_of(std::move(parts));
            }
            default: throw TypeError("expected a number, found the condition '" + to_text(e) + "'");
            }
        }

        auto form(const Expr & e) const -> fd::BoolForm
        {
            using K = Expr::Kind;
            switch (e.kind) {
            case K::Compare: return atom(arith(e.args[0]), e.op, arith(e.args[1]));
            case K::And:
            case K::Or: {
                std::vector<fd::BoolForm> parts;
                flatten(e, e.kind, parts);
                return e.kind == K::And ? fd::BoolForm::all_of(std::move(parts)) : fd::BoolForm::any_of(std::move(parts));
            }
            case K::Not: return fd::BoolForm::negation(form(e.args[0]));
            case K::Xor: return fd::BoolForm::exclusive_or(form(e.args[0]), form(e.args[1]));
            case K::Implies: return fd::BoolForm::implies(form(e.args[0]), form(e.args[1]));
            case K::Iff: return fd::BoolForm::iff(form(e.args[0]), form(e.args[1]));
            default:
                if (e.is_symbolic())
                    throw NotReifiable("'" + to_text(e) + "' cannot be used inside a condition");
                throw TypeError("expected a condition, found the number '" + to_text(e) + "'");
            }
        }

        auto refs(const Expr & e) const -> std::vector<fd::VarRef>
        {
            std::vector<fd::VarRef> out;
            for (const auto & a : e.args) {
                auto n = arith(a);
                if (n.kind() != fd::NumExpr::Kind::Var)
                    throw TypeError("expected a feature or attribute reference, found '" + to_text(a) + "'");
                out.push_back(n.var_ref());
            }
            return out;
        }

        auto value(const Literal & l) const -> Int
        {
            auto v = _m.literal_value(l);
            if (! v)
                throw TypeError("unknown code '" + l.code + "'");
            return *v;
        }

        /// Symbolic node as fd-core globals.
        auto globals(const Expr & e) const -> std::vector<fd::Constraint>
        {
            using K = Expr::Kind;
            switch (e.kind) {
            case K::AllDifferent: return {fd::AllDifferent{refs(e)}};
            case K::AtMost: return {fd::atmost(value(e.n), refs(e), value(e.m))};
            case K::AtLeast: return {fd::atleast(value(e.n), refs(e), value(e.m))};
            case K::Exactly: return {fd::exactly(value(e.n), refs(e), value(e.m))};
            case K::Choose: {
                auto vs = refs(e);
                return {fd::atleast(value(e.n), vs, 1), fd::atmost(value(e.m), vs, 1)};
            }
            case K::Relation: {
                fd::Table t{refs(e), {}};
                for (const auto & tuple : e.tuples) {
                    std::vector<Int> row;
                    for (const auto & l : tuple)
                        row.push_back(value(l));
                    if (row.size() != t.vars.size())
                        throw ArityMismatch("relation tuple has " + std::to_string(row.size()) + " values for " +
                            std::to_string(t.vars.size()) + " references");
                    t.tuples.push_back(std::move(row));
                }
                return {std::move(t)};
            }
            default: return {};
            }
        }

        /**
         * Posts a constraint expression. Top-level conjunctions are split into
         * separate constraints; comparisons and globals are posted directly and
         * anything else is reified against a helper variable fixed to 1.
         */
        auto post(fd::Store & store, const Expr & e) const -> void
        {
            std::vector<const Expr *> parts;
            conjuncts(e, parts);
            for (const auto * p : parts) {
                auto label = to_text(*p);
                if (p->kind == Expr::Kind::Compare)
                    store.post(fd::Cmp{arith(p->args[0]), p->op, arith(p->args[1])}, label);
                else if (p->is_symbolic())
                    for (auto & c : globals(*p))
                        store.post(std::move(c), label);
                else {
                    auto f = form(*p);
                    auto b = store.new_var(IntervalSet::singleton(1), "$c" + std::to_string(store.num_vars()));
                    store.post(fd::Reified{b, std::move(f)}, label);
                }
            }
        }

    private:
        static auto conjuncts(const Expr & e, std::vector<const Expr *> & out) -> void
        {
            if (e.kind == Expr::Kind::And)
                for (const auto & a : e.args)
                    conjuncts(a, out);
            else
                out.push_back(&e);
        }

        auto flatten(const Expr & e, Expr::Kind k, std::vector<fd::BoolForm> & out) const -> void
        {
            if (e.kind == k)
                for (const auto & a : e.args)
                    flatten(a, k, out);
            else
                out.push_back(form(e));
        }

        const FeatureModel & _m;
        const VarMap & _vm;
    };

    inline auto edge_label(const Feature & f) -> std::string
    {
        return f.name + " of " + *f.parent + (f.edge == Edge::Mandatory ? " mandatory" : " optional");
    }

    inline auto lower_hierarchy(const Feature & parent, const Feature & child, const VarMap & vm, fd::Store & s) -> void
    {
        auto p = var(vm.feature(parent.name));
        auto c = var(vm.feature(child.name));
        auto label = edge_label(child);
        bool mandatory = child.edge == Edge::Mandatory;
        if (parent.is_boolean() && ! child.is_boolean()) {
            if (mandatory)
                s.post(fd::Cmp{c, fd::CmpOp::Ge, p}, label);
            s.post(fd::Cmp{c, fd::CmpOp::Le, child.max_count * p}, label);
            return;
        }
        s.post(fd::Cmp{c, mandatory ? fd::CmpOp::Eq : fd::CmpOp::Le, p}, label);
    }

    inline auto group_label(const Group & g) -> std::string
    {
        std::string s = "group of " + g.parent + " [" + std::to_string(g.min) + ".." + std::to_string(g.max) + "] { ";
        for (std::size_t i = 0; i < g.members.size(); ++i)
            s += (i ? ", " : "") + g.members[i];
        return s + " }";
    }

    inline auto lower_group(const Group & g, const VarMap & vm, fd::Store & s) -> void
    {
        std::vector<fd::VarRef> members;
        for (const auto & m : g.members)
            members.push_back(vm.feature(m));
        auto p = var(vm.feature(g.parent));
        auto sum = fd::NumExpr::sum(members);
        auto label = group_label(g);
        s.post(fd::Cmp{sum, fd::CmpOp::Ge, g.min * p}, label);
        s.post(fd::Cmp{sum, fd::CmpOp::Le, g.max * p}, label);
    }

    inline auto cross_label(const CrossDep & d) -> std::string
    {
        std::string s = d.from + (d.kind == CrossDep::Kind::Requires ? " requires " : " excludes ") + d.to;
        if (d.semantics == CrossDep::Semantics::PerInstance) {
            s += " per instance";
            if (d.offset != 0)
                s += " + " + std::to_string(d.offset);
        }
        return s;
    }

    inline auto lower_cross(const CrossDep & d, const VarMap & vm, fd::Store & s) -> void
    {
        auto from = var(vm.feature(d.from));
        auto to = var(vm.feature(d.to));
        auto label = cross_label(d);
        auto present = [](const fd::NumExpr & x) { return atom(x, fd::CmpOp::Ge, lit(1)); };
        if (d.kind == CrossDep::Kind::Requires && d.semantics == CrossDep::Semantics::PerInstance) {
            s.post(fd::Cmp{to, fd::CmpOp::Ge, from + lit(d.offset)}, label);
            return;
        }
        auto b = s.new_var(IntervalSet::singleton(1), "$c" + std::to_string(s.num_vars()));
        if (d.kind == CrossDep::Kind::Requires)
            s.post(fd::Reified{b, fd::BoolForm::implies(present(from), present(to))}, label);
        else
            s.post(fd::Reified{b, fd::BoolForm::negation(fd::BoolForm::all_of({present(from), present(to)}))}, label);
    }

} // namespace detail

/// Arithmetic goal expression over the model's variables.
inline auto lower_goal(const FeatureModel & m, const VarMap & vm, const Expr & e) -> fd::NumExpr
{
    return detail::Lowering(m, vm).arith(e);
}

/// Lowers and posts a constraint expression (used for configure-time additions).
inline auto post_constraint(const FeatureModel & m, const VarMap & vm, fd::Store & store, const Expr & e) -> void
{
    for (const auto & d : check_constraint(m, e)) {
        if (d.code == "not-reifiable")
            throw NotReifiable(d.message);
        throw TypeError(d.message);
    }
    detail::Lowering(m, vm).post(store, e);
}

/**
 * Builds the store for a valid model: one variable per feature (its occurrence
 * count) followed by one per attribute, then the hierarchy, groups,
 * cross-tree dependencies, constraints and root = 1, in that order.
 */
inline auto compile(const FeatureModel & m) -> CompiledModel
{
    if (auto diags = validate_model(m); ! diags.empty())
        throw CompileError("model is not valid: " + diags.front().message);

    CompiledModel out;
    auto & s = out.store;
    auto & vm = out.vars;
    for (const auto & f : m.features) {
        auto v = s.new_var(IntervalSet::range(0, f.max_count), f.name);
        vm.by_name.emplace(f.name, v);
        vm.feature_vars.push_back(v);
        vm.model_vars.push_back(v);
        for (const auto & a : f.attributes) {
            auto name = f.name + "." + a.name;
            auto av = s.new_var(m.domain_of(a), name);
            vm.by_name.emplace(name, av);
            vm.model_vars.push_back(av);
        }
    }

    const auto * root = m.root();
    s.post(fd::Cmp{detail::var(vm.feature(root->name)), fd::CmpOp::Eq, detail::lit(1)}, "root " + root->name);
    for (const auto & f : m.features)
        if (f.parent)
            detail::lower_hierarchy(*m.feature(*f.parent), f, vm, s);
    for (const auto & g : m.groups)
        detail::lower_group(g, vm, s);
    for (const auto & d : m.cross_deps)
        detail::lower_cross(d, vm, s);
    detail::Lowering lowering(m, vm);
    for (const auto & c : m.constraints)
        lowering.post(s, c);
    for (const auto & g : m.goals)
        vm.goals.emplace(g.name, lowering.arith(g.expr));
    s.propagate();
    return out;
}

/// Stable text dump: variable declarations, then one constraint per line.
inline auto emit_csp(const CompiledModel & c) -> std::string
{
    std::ostringstream os;
    for (std::uint32_t v = 0; v < c.store.num_vars(); ++v)
        os << "var " << c.store.name(v) << " in " << c.store.initial_domain(v).to_string() << '\n';
    for (const auto & e : c.store.constraints())
        os << fd::render(e.source) << '\n';
    return os.str();
}

} // namespace featline::fm

#endif
