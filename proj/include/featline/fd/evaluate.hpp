#ifndef FEATLINE_FD_EVALUATE_HPP
#define FEATLINE_FD_EVALUATE_HPP

#include <featline/fd/arith.hpp>
#include <featline/fd/constraint.hpp>

#include <algorithm>
#include <span>

// Ground evaluation over a total assignment indexed by VarRef::index.

namespace featline::fd {

inline auto evaluate(const NumExpr & e, std::span<const Int> a) -> Int
{
    switch (e.kind()) {
    case NumExpr::Kind::Const: return e.value();
    case NumExpr::Kind::Var: return a[e.var_ref().index];
    case NumExpr::Kind::WeightedSum: {
        Int total = e.offset();
        for (std::size_t i = 0; i < e.terms().size(); ++i)
            total = arith::add(total, arith::mul(e.coeffs()[i], evaluate(e.terms()[i], a)));
        return total;
    }
    case NumExpr::Kind::Product: return arith::mul(evaluate(e.terms()[0], a), evaluate(e.terms()[1], a));
    case NumExpr::Kind::Min:
    case NumExpr::Kind::Max: {
        Int r = evaluate(e.terms()[0], a);
        for (std::size_t i = 1; i < e.terms().size(); ++i) {
            Int t = evaluate(e.terms()[i], a);
            r = e.kind() == NumExpr::Kind::Min ? std::min(r, t) : std::max(r, t);
        }
        return r;
    }
    }
    return 0;
}

inline auto holds(const Cmp & c, std::span<const Int> a) -> bool { return holds(evaluate(c.lhs, a), c.op, evaluate(c.rhs, a)); }

inline auto holds(const BoolForm & f, std::span<const Int> a) -> bool
{
    using K = BoolForm::Kind;
    const auto & ch = f.children();
    switch (f.kind()) {
    case K::Atom: return holds(f.atom_cmp(), a);
    case K::And: return std::all_of(ch.begin(), ch.end(), [&](const BoolForm & c) { return holds(c, a); });
    case K::Or: return std::any_of(ch.begin(), ch.end(), [&](const BoolForm & c) { return holds(c, a); });
    case K::Not: return ! holds(ch[0], a);
    case K::Implies: return ! holds(ch[0], a) || holds(ch[1], a);
    case K::Iff: return holds(ch[0], a) == holds(ch[1], a);
    case K::Xor: return holds(ch[0], a) != holds(ch[1], a);
    }
    return false;
}

inline auto holds(const Constraint & c, std::span<const Int> a) -> bool
{
    return std::visit(
        [&](const auto & k) -> bool {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, Cmp>)
                return holds(k, a);
            else if constexpr (std::is_same_v<T, Element>) {
                Int i = a[k.index.index];
                return i >= 1 && i <= static_cast<Int>(k.values.size()) && k.values[static_cast<std::size_t>(i - 1)] == a[k.result.index];
            }
            else if constexpr (std::is_same_v<T, Table>) {
                return std::any_of(k.tuples.begin(), k.tuples.end(), [&](const std::vector<Int> & t) {
                    for (std::size_t j = 0; j < k.vars.size(); ++j)
                        if (t[j] != a[k.vars[j].index])
                            return false;
                    return true;
                });
            }
            else if constexpr (std::is_same_v<T, AllDifferent>) {
                for (std::size_t i = 0; i < k.vars.size(); ++i)
                    for (std::size_t j = i + 1; j < k.vars.size(); ++j)
                        if (a[k.vars[i].index] == a[k.vars[j].index])
                            return false;
                return true;
            }
            else if constexpr (std::is_same_v<T, Count>) {
                auto n = std::count_if(k.vars.begin(), k.vars.end(), [&](const VarRef & v) { return a[v.index] == k.value; });
                return holds(static_cast<Int>(n), k.op, k.n);
            }
            else {
                Int b = a[k.b.index];
                return (b == 0 || b == 1) && (b == 1) == holds(k.form, a);
            }
        },
        c);
}

} // namespace featline::fd

#endif
