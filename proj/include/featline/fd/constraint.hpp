#ifndef FEATLINE_FD_CONSTRAINT_HPP
#define FEATLINE_FD_CONSTRAINT_HPP

#include <featline/error.hpp>
#include <featline/interval_set.hpp>

#include <cstdint>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace featline::fd {

struct VarRef
{
    std::uint32_t index = 0;
    std::string name;

    auto operator==(const VarRef & other) const -> bool { return index == other.index; }
};

/// Integer expression tree. Linear parts are WeightedSum nodes; the only
/// non-linear operators are Product, Min and Max.
class NumExpr
{
public:
    enum class Kind
    {
        Const,
        Var,
        WeightedSum,
        Product,
        Min,
        Max
    };

    NumExpr() = default;

    static auto constant(Int v) -> NumExpr
    {
        NumExpr e;
        e._kind = Kind::Const;
        e._value = v;
        return e;
    }

    static auto var(VarRef v) -> NumExpr
    {
        NumExpr e;
        e._kind = Kind::Var;
        e._var = std::move(v);
        return e;
    }

    static auto weighted_sum(std::vector<Int> coeffs, std::vector<NumExpr> terms, Int offset = 0) -> NumExpr
    {
        if (coeffs.size() != terms.size())
            throw InvalidArgument("weighted sum needs one coefficient per term");
        NumExpr e;
        e._kind = Kind::WeightedSum;
        e._coeffs = std::move(coeffs);
        e._terms = std::move(terms);
        e._value = offset;
        return e;
    }

    static auto weighted_sum(std::vector<Int> coeffs, const std::vector<VarRef> & vars, Int offset = 0) -> NumExpr
    {
        std::vector<NumExpr> terms;
        for (const auto & v : vars)
            terms.push_back(var(v));
        return weighted_sum(std::move(coeffs), std::move(terms), offset);
    }

    static auto sum(const std::vector<VarRef> & vars) -> NumExpr
    {
        return weighted_sum(std::vector<Int>(vars.size(), 1), vars);
    }

    static auto product(NumExpr a, NumExpr b) -> NumExpr
    {
        NumExpr e;
        e._kind = Kind::Product;
        e._terms = {std::move(a), std::move(b)};
        return e;
    }

    static auto min_of(std::vector<NumExpr> args) -> NumExpr { return extremum(Kind::Min, std::move(args)); }
    static auto max_of(std::vector<NumExpr> args) -> NumExpr { return extremum(Kind::Max, std::move(args)); }

    auto kind() const -> Kind { return _kind; }
    /// Const value, or the offset of a WeightedSum.
    auto value() const -> Int { return _value; }
    auto offset() const -> Int { return _value; }
    auto var_ref() const -> const VarRef & { return _var; }
    auto coeffs() const -> const std::vector<Int> & { return _coeffs; }
    /// Summands, the two factors of a Product, or the arguments of Min/Max.
    auto terms() const -> const std::vector<NumExpr> & { return _terms; }

    template <typename F>
    auto for_each_var(F && f) const -> void
    {
        if (_kind == Kind::Var)
            f(_var);
        for (const auto & t : _terms)
            t.for_each_var(f);
    }

private:
    static auto extremum(Kind k, std::vector<NumExpr> args) -> NumExpr
    {
        if (args.empty())
            throw InvalidArgument("min/max of an empty list");
        NumExpr e;
        e._kind = k;
        e._terms = std::move(args);
        return e;
    }

    Kind _kind = Kind::Const;
    Int _value = 0;
    VarRef _var;
    std::vector<Int> _coeffs;
    std::vector<NumExpr> _terms;
};

inline auto operator+(NumExpr a, NumExpr b) -> NumExpr
{
    return NumExpr::weighted_sum({1, 1}, std::vector<NumExpr>{std::move(a), std::move(b)});
}
inline auto operator-(NumExpr a, NumExpr b) -> NumExpr
{
    return NumExpr::weighted_sum({1, -1}, std::vector<NumExpr>{std::move(a), std::move(b)});
}
inline auto operator*(NumExpr a, NumExpr b) -> NumExpr { return NumExpr::product(std::move(a), std::move(b)); }
inline auto operator*(Int c, NumExpr a) -> NumExpr
{
    return NumExpr::weighted_sum({c}, std::vector<NumExpr>{std::move(a)});
}

enum class CmpOp
{
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge
};

inline auto negate(CmpOp op) -> CmpOp
{
    switch (op) {
    case CmpOp::Eq: return CmpOp::Ne;
    case CmpOp::Ne: return CmpOp::Eq;
    case CmpOp::Lt: return CmpOp::Ge;
    case CmpOp::Le: return CmpOp::Gt;
    case CmpOp::Gt: return CmpOp::Le;
    case CmpOp::Ge: return CmpOp::Lt;
    }
    return op;
}

inline auto to_string(CmpOp op) -> const char *
{
    switch (op) {
    case CmpOp::Eq: return "=";
    case CmpOp::Ne: return "!=";
    case CmpOp::Lt: return "<";
    case CmpOp::Le: return "<=";
    case CmpOp::Gt: return ">";
    case CmpOp::Ge: return ">=";
    }
    return "?";
}

inline auto holds(Int lhs, CmpOp op, Int rhs) -> bool
{
    switch (op) {
    case CmpOp::Eq: return lhs == rhs;
    case CmpOp::Ne: return lhs != rhs;
    case CmpOp::Lt: return lhs < rhs;
    case CmpOp::Le: return lhs <= rhs;
    case CmpOp::Gt: return lhs > rhs;
    case CmpOp::Ge: return lhs >= rhs;
    }
    return false;
}

enum class Direction
{
    Minimize,
    Maximize
};

struct Cmp
{
    NumExpr lhs;
    CmpOp op = CmpOp::Eq;
    NumExpr rhs;
};

/// Boolean combination of comparison atoms; the reifiable class.
class BoolForm
{
public:
    enum class Kind
    {
        Atom,
        And,
        Or,
        Not,
        Implies,
        Iff,
        Xor
    };

    BoolForm() = default;

    static auto atom(Cmp c) -> BoolForm
    {
        BoolForm f;
        f._kind = Kind::Atom;
        f._atom = std::move(c);
        return f;
    }
    static auto all_of(std::vector<BoolForm> parts) -> BoolForm { return node(Kind::And, std::move(parts)); }
    static auto any_of(std::vector<BoolForm> parts) -> BoolForm { return node(Kind::Or, std::move(parts)); }
    static auto negation(BoolForm f) -> BoolForm { return node(Kind::Not, {std::move(f)}); }
    static auto implies(BoolForm a, BoolForm b) -> BoolForm { return node(Kind::Implies, {std::move(a), std::move(b)}); }
    static auto iff(BoolForm a, BoolForm b) -> BoolForm { return node(Kind::Iff, {std::move(a), std::move(b)}); }
    static auto exclusive_or(BoolForm a, BoolForm b) -> BoolForm { return node(Kind::Xor, {std::move(a), std::move(b)}); }

    auto kind() const -> Kind { return _kind; }
    auto atom_cmp() const -> const Cmp & { return _atom; }
    auto children() const -> const std::vector<BoolForm> & { return _children; }

    template <typename F>
    auto for_each_var(F && f) const -> void
    {
        if (_kind == Kind::Atom) {
            _atom.lhs.for_each_var(f);
            _atom.rhs.for_each_var(f);
        }
        for (const auto & c : _children)
            c.for_each_var(f);
    }

private:
    static auto node(Kind k, std::vector<BoolForm> parts) -> BoolForm
    {
        BoolForm f;
        f._kind = k;
        f._children = std::move(parts);
        return f;
    }

    Kind _kind = Kind::And;
    Cmp _atom;
    std::vector<BoolForm> _children;
};

/// index is 1-based into values.
struct Element
{
    VarRef index;
    std::vector<Int> values;
    VarRef result;
};

struct Table
{
    std::vector<VarRef> vars;
    std::vector<std::vector<Int>> tuples;
};

struct AllDifferent
{
    std::vector<VarRef> vars;
};

/// atmost (Le), atleast (Ge), exactly (Eq): how many of vars equal value.
struct Count
{
    std::vector<VarRef> vars;
    Int value = 0;
    CmpOp op = CmpOp::Le;
    Int n = 0;
};

struct Reified
{
    VarRef b;
    BoolForm form;
};

using Constraint = std::variant<Cmp, Element, Table, AllDifferent, Count, Reified>;

inline auto atmost(Int n, std::vector<VarRef> vars, Int value) -> Count { return {std::move(vars), value, CmpOp::Le, n}; }
inline auto atleast(Int n, std::vector<VarRef> vars, Int value) -> Count { return {std::move(vars), value, CmpOp::Ge, n}; }
inline auto exactly(Int n, std::vector<VarRef> vars, Int value) -> Count { return {std::move(vars), value, CmpOp::Eq, n}; }

inline auto variables_of(const Constraint & c) -> std::vector<VarRef>
{
    std::vector<VarRef> out;
    auto add = [&](const VarRef & v) { out.push_back(v); };
    std::visit(
        [&](const auto & k) {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, Cmp>) {
                k.lhs.for_each_var(add);
                k.rhs.for_each_var(add);
            }
            else if constexpr (std::is_same_v<T, Element>) {
                add(k.index);
                add(k.result);
            }
            else if constexpr (std::is_same_v<T, Reified>) {
                add(k.b);
                k.form.for_each_var(add);
            }
            else
                for (const auto & v : k.vars)
                    add(v);
        },
        c);
    return out;
}

// Text rendering, used for constraint labels and the --emit-csp dump.

inline auto render(const NumExpr & e) -> std::string;

namespace detail {
    inline auto render_term(const NumExpr & e) -> std::string
    {
        if (e.kind() == NumExpr::Kind::WeightedSum)
            return "(" + render(e) + ")";
        return render(e);
    }
}

inline auto render(const NumExpr & e) -> std::string
{
    std::ostringstream os;
    switch (e.kind()) {
    case NumExpr::Kind::Const: os << e.value(); break;
    case NumExpr::Kind::Var: os << e.var_ref().name; break;
    case NumExpr::Kind::WeightedSum: {
        bool first = true;
        for (std::size_t i = 0; i < e.terms().size(); ++i) {
            Int c = e.coeffs()[i];
            if (c == 0)
                continue;
            Int mag = c < 0 ? -c : c;
            if (first)
                os << (c < 0 ? "-" : "");
            else
                os << (c < 0 ? " - " : " + ");
            if (mag != 1)
                os << mag << "*";
            os << (mag != 1 ? detail::render_term(e.terms()[i]) : render(e.terms()[i]));
            first = false;
        }
        if (e.offset() != 0 || first) {
            if (first)
                os << e.offset();
            else
                os << (e.offset() < 0 ? " - " : " + ") << (e.offset() < 0 ? -e.offset() : e.offset());
        }
        break;
    }
    case NumExpr::Kind::Product:
        os << detail::render_term(e.terms()[0]) << "*" << detail::render_term(e.terms()[1]);
        break;
    case NumExpr::Kind::Min:
    case NumExpr::Kind::Max: {
        os << (e.kind() == NumExpr::Kind::Min ? "min(" : "max(");
        for (std::size_t i = 0; i < e.terms().size(); ++i)
            os << (i ? ", " : "") << render(e.terms()[i]);
        os << ")";
        break;
    }
    }
    return os.str();
}

inline auto render(const Cmp & c) -> std::string { return render(c.lhs) + " " + to_string(c.op) + " " + render(c.rhs); }

inline auto render(const BoolForm & f) -> std::string
{
    using K = BoolForm::Kind;
    auto join = [&](const char * sep) {
        std::string s = "(";
        for (std::size_t i = 0; i < f.children().size(); ++i)
            s += (i ? sep : "") + render(f.children()[i]);
        return s + ")";
    };
    switch (f.kind()) {
    case K::Atom: return render(f.atom_cmp());
    case K::And: return join(" and ");
    case K::Or: return join(" or ");
    case K::Not: return "not " + render(f.children()[0]);
    case K::Implies: return join(" => ");
    case K::Iff: return join(" <=> ");
    case K::Xor: return join(" xor ");
    }
    return "?";
}

namespace detail {
    inline auto render_vars(const std::vector<VarRef> & vars) -> std::string
    {
        std::string s = "[";
        for (std::size_t i = 0; i < vars.size(); ++i)
            s += (i ? ", " : "") + vars[i].name;
        return s + "]";
    }
}

inline auto render(const Constraint & c) -> std::string
{
    return std::visit(
        [](const auto & k) -> std::string {
            using T = std::decay_t<decltype(k)>;
            std::ostringstream os;
            if constexpr (std::is_same_v<T, Cmp>)
                os << render(k);
            else if constexpr (std::is_same_v<T, Element>) {
                os << "element(" << k.index.name << ", [";
                for (std::size_t i = 0; i < k.values.size(); ++i)
                    os << (i ? ", " : "") << k.values[i];
                os << "], " << k.result.name << ")";
            }
            else if constexpr (std::is_same_v<T, Table>) {
                os << "table(" << detail::render_vars(k.vars) << ", [";
                for (std::size_t t = 0; t < k.tuples.size(); ++t) {
                    os << (t ? ", " : "") << "(";
                    for (std::size_t i = 0; i < k.tuples[t].size(); ++i)
                        os << (i ? ", " : "") << k.tuples[t][i];
                    os << ")";
                }
                os << "])";
            }
            else if constexpr (std::is_same_v<T, AllDifferent>)
                os << "alldifferent(" << detail::render_vars(k.vars) << ")";
            else if constexpr (std::is_same_v<T, Count>) {
                const char * name = k.op == CmpOp::Le ? "atmost" : k.op == CmpOp::Ge ? "atleast" : "exactly";
                os << name << "(" << k.n << ", " << detail::render_vars(k.vars) << ", " << k.value << ")";
            }
            else
                os << k.b.name << " <=> " << render(k.form);
            return os.str();
        },
        c);
}

} // namespace featline::fd

#endif
