#ifndef FEATLINE_FD_STORE_HPP
#define FEATLINE_FD_STORE_HPP

#include <featline/fd/arith.hpp>
#include <featline/fd/constraint.hpp>

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace featline::fd {

enum class Status
{
    Consistent,
    Failed
};

/// Opaque handle to an open decision level.
struct LevelId
{
    std::size_t depth = 0;
    std::uint64_t serial = 0;

    auto operator==(const LevelId &) const -> bool = default;
};

/// Which constraint emptied which variable. constraint is empty when the
/// domain was emptied by a direct restriction (a search or user decision).
struct Failure
{
    std::optional<std::size_t> constraint;
    std::uint32_t var = 0;
};

namespace detail {
    struct Term
    {
        Int coeff;
        NumExpr expr;
    };

    /// sum(coeff * expr) + constant  <op>  0
    struct LinearCmp
    {
        std::vector<Term> terms;
        Int constant = 0;
        CmpOp op = CmpOp::Eq;
    };

    struct CompiledForm
    {
        BoolForm::Kind kind = BoolForm::Kind::And;
        LinearCmp atom;
        std::vector<CompiledForm> children;
    };

    struct CompiledReified
    {
        std::uint32_t b;
        CompiledForm form;
    };

    using Compiled = std::variant<LinearCmp, Element, Table, AllDifferent, Count, CompiledReified>;

    enum class Truth
    {
        False,
        True,
        Unknown
    };

    inline auto flip(Truth t) -> Truth
    {
        return t == Truth::Unknown ? t : (t == Truth::True ? Truth::False : Truth::True);
    }

    inline auto collect_linear(const NumExpr & e, Int scale, std::vector<Term> & terms, std::map<std::uint32_t, std::size_t> & var_slot,
        Int & constant) -> void
    {
        if (scale == 0)
            return;
        switch (e.kind()) {
        case NumExpr::Kind::Const: constant = arith::add(constant, arith::mul(scale, e.value())); return;
        case NumExpr::Kind::Var: {
            auto [it, fresh] = var_slot.emplace(e.var_ref().index, terms.size());
            if (fresh)
                terms.push_back({scale, e});
            else
                terms[it->second].coeff = arith::add(terms[it->second].coeff, scale);
            return;
        }
        case NumExpr::Kind::WeightedSum:
            constant = arith::add(constant, arith::mul(scale, e.offset()));
            for (std::size_t i = 0; i < e.terms().size(); ++i)
                collect_linear(e.terms()[i], arith::mul(scale, e.coeffs()[i]), terms, var_slot, constant);
            return;
        case NumExpr::Kind::Product:
            if (e.terms()[0].kind() == NumExpr::Kind::Const) {
                collect_linear(e.terms()[1], arith::mul(scale, e.terms()[0].value()), terms, var_slot, constant);
                return;
            }
            if (e.terms()[1].kind() == NumExpr::Kind::Const) {
                collect_linear(e.terms()[0], arith::mul(scale, e.terms()[1].value()), terms, var_slot, constant);
                return;
            }
            terms.push_back({scale, e});
            return;
        case NumExpr::Kind::Min:
        case NumExpr::Kind::Max: terms.push_back({scale, e}); return;
        }
    }

    /// Normalises lhs - rhs into a linear combination over variables and
    /// opaque non-linear terms. Repeated variables are merged, so X - X
    /// vanishes.
    inline auto linearize(const Cmp & c) -> LinearCmp
    {
        LinearCmp out;
        std::map<std::uint32_t, std::size_t> var_slot;
        collect_linear(c.lhs, 1, out.terms, var_slot, out.constant);
        collect_linear(c.rhs, -1, out.terms, var_slot, out.constant);
        std::erase_if(out.terms, [](const Term & t) { return t.coeff == 0; });
        out.op = c.op;
        return out;
    }

    inline auto compile_form(const BoolForm & f) -> CompiledForm
    {
        CompiledForm out;
        out.kind = f.kind();
        if (f.kind() == BoolForm::Kind::Atom)
            out.atom = linearize(f.atom_cmp());
        for (const auto & c : f.children())
            out.children.push_back(compile_form(c));
        return out;
    }
} // namespace detail

/**
 * Finite-domain constraint store.
 *
 * Domains live in a trailed array; constraints are propagated through a FIFO
 * queue (each constraint queued at most once) until no propagator can narrow
 * anything. Decision levels snapshot the trail position and constraint count
 * so that pop_to() restores domains and retracts constraints exactly.
 */
class Store
{
public:
    struct Entry
    {
        Constraint source;
        std::string label;
        std::vector<std::uint32_t> vars;
        detail::Compiled compiled;
    };

    auto new_var(IntervalSet domain, std::string name) -> VarRef
    {
        if (domain.empty())
            throw EmptyDomain("variable '" + name + "' declared with an empty domain");
        VarRef ref{static_cast<std::uint32_t>(_domains.size()), std::move(name)};
        _initial.push_back(domain);
        _domains.push_back(std::move(domain));
        _names.push_back(ref.name);
        _subscriptions.emplace_back();
        return ref;
    }

    auto num_vars() const -> std::size_t { return _domains.size(); }
    auto domain(std::uint32_t var) const -> const IntervalSet & { return _domains.at(var); }
    auto domain(const VarRef & v) const -> const IntervalSet & { return domain(v.index); }
    auto domains() const -> const std::vector<IntervalSet> & { return _domains; }
    auto initial_domain(std::uint32_t var) const -> const IntervalSet & { return _initial.at(var); }
    auto name(std::uint32_t var) const -> const std::string & { return _names.at(var); }
    auto ref(std::uint32_t var) const -> VarRef { return {var, _names.at(var)}; }
    auto status() const -> Status { return _status; }
    auto failure() const -> const std::optional<Failure> & { return _failure; }
    auto constraints() const -> const std::vector<Entry> & { return _constraints; }
    auto is_fixed(std::uint32_t var) const -> bool { return _domains.at(var).is_singleton(); }

    /// Registers c and propagates to fixpoint.
    auto post(Constraint c, std::string label = {}) -> Status
    {
        Entry entry;
        entry.vars = distinct_vars(c);
        entry.compiled = compile(c);
        entry.label = label.empty() ? render(c) : std::move(label);
        entry.source = std::move(c);

        std::size_t index = _constraints.size();
        _constraints.push_back(std::move(entry));
        for (auto v : _constraints.back().vars)
            _subscriptions[v].push_back(index);
        if (_status == Status::Failed)
            return _status;
        enqueue(index);
        return propagate();
    }

    auto propagate() -> Status
    {
        if (_status == Status::Failed) {
            clear_queue();
            return _status;
        }
        try {
            while (! _queue.empty()) {
                std::size_t c = _queue.front();
                _queue.pop_front();
                _in_queue[c] = false;
                _cause = static_cast<std::int64_t>(c);
                bool ok = run(c);
                _cause = -1;
                if (! ok) {
                    clear_queue();
                    return _status;
                }
            }
        }
        catch (...) {
            _cause = -1;
            clear_queue();
            throw;
        }
        return _status;
    }

    auto push_level() -> LevelId
    {
        _levels.push_back({_trail.size(), _constraints.size(), _status, _failure, ++_serial});
        return {_levels.size() - 1, _serial};
    }

    auto pop_to(LevelId level) -> void
    {
        if (level.depth >= _levels.size() || _levels[level.depth].serial != level.serial)
            throw UnknownLevel("level is not open");
        const auto mark = _levels[level.depth];
        while (_trail.size() > mark.trail_size) {
            auto & t = _trail.back();
            _domains[t.var] = std::move(t.old);
            _trail.pop_back();
        }
        while (_constraints.size() > mark.num_constraints) {
            std::size_t index = _constraints.size() - 1;
            for (auto v : _constraints.back().vars)
                if (! _subscriptions[v].empty() && _subscriptions[v].back() == index)
                    _subscriptions[v].pop_back();
            _constraints.pop_back();
        }
        _status = mark.status;
        _failure = mark.failure;
        clear_queue();
        _levels.resize(level.depth);
    }

    auto open_levels() const -> std::size_t { return _levels.size(); }
    auto level_at(std::size_t depth) const -> LevelId { return {depth, _levels.at(depth).serial}; }

    /// Number of domain changes ever made; a cheap "did anything move" probe.
    auto change_count() const -> std::uint64_t { return _changes; }

    // Direct restrictions, used for search and user decisions. They queue
    // the affected propagators but do not run them; call propagate().

    auto restrict_domain(std::uint32_t var, const IntervalSet & allowed) -> bool
    {
        return _status == Status::Consistent && intersect(var, allowed);
    }
    auto assign(std::uint32_t var, Int v) -> bool { return _status == Status::Consistent && fix(var, v); }
    auto exclude(std::uint32_t var, Int v) -> bool { return _status == Status::Consistent && remove_value(var, v); }

    /// Runs the filtering of c once without registering it.
    auto filter_once(const Cmp & c) -> bool
    {
        if (_status == Status::Failed)
            return false;
        auto lin = detail::linearize(c);
        check_linear(lin);
        return filter_linear(lin);
    }

    /// Most recent constraint that narrowed var on the current trail.
    auto last_narrower(std::uint32_t var) const -> std::optional<std::size_t>
    {
        for (auto it = _trail.rbegin(); it != _trail.rend(); ++it)
            if (it->var == var && it->cause >= 0)
                return static_cast<std::size_t>(it->cause);
        return std::nullopt;
    }

    auto bounds(const NumExpr & e) const -> arith::Range { return bounds_in(e, _domains); }

private:
    static auto bounds_in(const NumExpr & e, const std::vector<IntervalSet> & doms) -> arith::Range
    {
        switch (e.kind()) {
        case NumExpr::Kind::Const: return {e.value(), e.value()};
        case NumExpr::Kind::Var: {
            const auto & d = doms[e.var_ref().index];
            return {d.min(), d.max()};
        }
        case NumExpr::Kind::WeightedSum: {
            arith::Range r{e.offset(), e.offset()};
            for (std::size_t i = 0; i < e.terms().size(); ++i) {
                auto t = arith::scale(e.coeffs()[i], bounds_in(e.terms()[i], doms));
                r.lo = arith::add(r.lo, t.lo);
                r.hi = arith::add(r.hi, t.hi);
            }
            return r;
        }
        case NumExpr::Kind::Product: return arith::product(bounds_in(e.terms()[0], doms), bounds_in(e.terms()[1], doms));
        case NumExpr::Kind::Min:
        case NumExpr::Kind::Max: {
            bool is_min = e.kind() == NumExpr::Kind::Min;
            arith::Range r = bounds_in(e.terms()[0], doms);
            for (std::size_t i = 1; i < e.terms().size(); ++i) {
                auto t = bounds_in(e.terms()[i], doms);
                r.lo = is_min ? std::min(r.lo, t.lo) : std::max(r.lo, t.lo);
                r.hi = is_min ? std::min(r.hi, t.hi) : std::max(r.hi, t.hi);
            }
            return r;
        }
        }
        return {};
    }

    struct TrailEntry
    {
        std::uint32_t var;
        IntervalSet old;
        std::int64_t cause;
    };

    struct Level
    {
        std::size_t trail_size;
        std::size_t num_constraints;
        Status status;
        std::optional<Failure> failure;
        std::uint64_t serial;
    };

    auto distinct_vars(const Constraint & c) const -> std::vector<std::uint32_t>
    {
        std::vector<std::uint32_t> out;
        for (const auto & v : variables_of(c)) {
            if (v.index >= _domains.size())
                throw InvalidArgument("variable '" + v.name + "' does not belong to this store");
            if (std::find(out.begin(), out.end(), v.index) == out.end())
                out.push_back(v.index);
        }
        return out;
    }

    auto compile(const Constraint & c) const -> detail::Compiled
    {
        return std::visit(
            [&](const auto & k) -> detail::Compiled {
                using T = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<T, Cmp>) {
                    auto lin = detail::linearize(k);
                    check_linear(lin);
                    return lin;
                }
                else if constexpr (std::is_same_v<T, Table>) {
                    for (const auto & t : k.tuples)
                        if (t.size() != k.vars.size())
                            throw ArityMismatch("table tuple has " + std::to_string(t.size()) + " values for " +
                                std::to_string(k.vars.size()) + " variables");
                    return k;
                }
                else if constexpr (std::is_same_v<T, Count>) {
                    if (k.n < 0)
                        throw InvalidArgument("count bound must be non-negative");
                    if (k.op != CmpOp::Le && k.op != CmpOp::Ge && k.op != CmpOp::Eq)
                        throw InvalidArgument("count operator must be <=, >= or =");
                    return k;
                }
                else if constexpr (std::is_same_v<T, Reified>) {
                    auto form = detail::compile_form(k.form);
                    check_form(form);
                    return detail::CompiledReified{k.b.index, std::move(form)};
                }
                else if constexpr (std::is_same_v<T, Element>) {
                    if (k.values.empty())
                        throw InvalidArgument("element over an empty value list");
                    return k;
                }
                else
                    return k;
            },
            c);
    }

    // Bound computations at post time use the initial (widest) domains, so a
    // constraint that passes here cannot overflow during later filtering.
    auto check_linear(const detail::LinearCmp & lin) const -> void
    {
        Int magnitude = arith::abs(lin.constant);
        for (const auto & t : lin.terms) {
            check_expr(t.expr);
            auto r = arith::scale(t.coeff, bounds_in(t.expr, _initial));
            magnitude = arith::add(magnitude, std::max(arith::abs(r.lo), arith::abs(r.hi)));
        }
    }

    auto check_expr(const NumExpr & e) const -> void
    {
        for (const auto & t : e.terms())
            check_expr(t);
        auto r = bounds_in(e, _initial);
        (void)arith::sub(r.hi, r.lo);
    }

    auto check_form(const detail::CompiledForm & f) const -> void
    {
        if (f.kind == BoolForm::Kind::Atom)
            check_linear(f.atom);
        for (const auto & c : f.children)
            check_form(c);
    }

    // ---- domain updates -------------------------------------------------

    auto save(std::uint32_t var) -> void { _trail.push_back({var, _domains[var], _cause}); }

    auto changed(std::uint32_t var) -> bool
    {
        ++_changes;
        if (_domains[var].empty()) {
            _status = Status::Failed;
            _failure = Failure{_cause >= 0 ? std::optional<std::size_t>(static_cast<std::size_t>(_cause)) : std::nullopt, var};
            return false;
        }
        for (auto c : _subscriptions[var])
            enqueue(c);
        return true;
    }

    auto set_min(std::uint32_t var, Int v) -> bool
    {
        auto & d = _domains[var];
        if (d.min() >= v)
            return true;
        save(var);
        d.remove_below(v);
        return changed(var);
    }

    auto set_max(std::uint32_t var, Int v) -> bool
    {
        auto & d = _domains[var];
        if (d.max() <= v)
            return true;
        save(var);
        d.remove_above(v);
        return changed(var);
    }

    auto remove_value(std::uint32_t var, Int v) -> bool
    {
        if (! _domains[var].contains(v))
            return true;
        save(var);
        _domains[var].remove(v);
        return changed(var);
    }

    auto fix(std::uint32_t var, Int v) -> bool
    {
        const auto & d = _domains[var];
        if (d.is_singleton() && d.min() == v)
            return true;
        return intersect(var, IntervalSet::singleton(v));
    }

    auto intersect(std::uint32_t var, const IntervalSet & allowed) -> bool
    {
        auto narrowed = _domains[var].intersection(allowed);
        if (narrowed == _domains[var])
            return true;
        save(var);
        _domains[var] = std::move(narrowed);
        return changed(var);
    }

    auto enqueue(std::size_t c) -> void
    {
        if (_in_queue.size() < _constraints.size())
            _in_queue.resize(_constraints.size(), false);
        if (! _in_queue[c]) {
            _in_queue[c] = true;
            _queue.push_back(c);
        }
    }

    auto clear_queue() -> void
    {
        for (auto c : _queue)
            if (c < _in_queue.size())
                _in_queue[c] = false;
        _queue.clear();
    }

    // ---- propagators ----------------------------------------------------

    auto run(std::size_t c) -> bool
    {
        return std::visit(
            [&](const auto & k) -> bool {
                using T = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<T, detail::LinearCmp>)
                    return filter_linear(k);
                else if constexpr (std::is_same_v<T, Element>)
                    return filter_element(k);
                else if constexpr (std::is_same_v<T, Table>)
                    return filter_table(k);
                else if constexpr (std::is_same_v<T, AllDifferent>)
                    return filter_alldifferent(k);
                else if constexpr (std::is_same_v<T, Count>)
                    return filter_count(k);
                else
                    return filter_reified(k);
            },
            _constraints[c].compiled);
    }

    auto fail_on(std::uint32_t var) -> bool
    {
        _status = Status::Failed;
        _failure = Failure{_cause >= 0 ? std::optional<std::size_t>(static_cast<std::size_t>(_cause)) : std::nullopt, var};
        return false;
    }

    auto first_var(const NumExpr & e) const -> std::uint32_t
    {
        std::uint32_t found = 0;
        bool seen = false;
        e.for_each_var([&](const VarRef & v) {
            if (! seen)
                found = v.index, seen = true;
        });
        return found;
    }

    auto first_var(const detail::LinearCmp & lin) const -> std::uint32_t
    {
        return lin.terms.empty() ? 0 : first_var(lin.terms.front().expr);
    }

    auto sum_bounds(const detail::LinearCmp & lin, std::vector<arith::Range> & parts) const -> arith::Range
    {
        arith::Range s{lin.constant, lin.constant};
        parts.clear();
        for (const auto & t : lin.terms) {
            parts.push_back(arith::scale(t.coeff, bounds(t.expr)));
            s.lo = arith::add(s.lo, parts.back().lo);
            s.hi = arith::add(s.hi, parts.back().hi);
        }
        return s;
    }

    static auto target_range(CmpOp op) -> arith::Range
    {
        switch (op) {
        case CmpOp::Eq: return {0, 0};
        case CmpOp::Lt: return {arith::neg_inf, -1};
        case CmpOp::Le: return {arith::neg_inf, 0};
        case CmpOp::Gt: return {1, arith::pos_inf};
        case CmpOp::Ge: return {0, arith::pos_inf};
        case CmpOp::Ne: break;
        }
        return {};
    }

    auto truth(const detail::LinearCmp & lin) const -> detail::Truth
    {
        std::vector<arith::Range> parts;
        auto s = sum_bounds(lin, parts);
        using detail::Truth;
        if ((lin.op == CmpOp::Eq || lin.op == CmpOp::Ne) && s.contains(0) && ! (s.lo == 0 && s.hi == 0)) {
            // A single open variable term: decide by domain membership, not bounds.
            std::size_t open = lin.terms.size();
            for (std::size_t i = 0; i < lin.terms.size(); ++i)
                if (! parts[i].fixed()) {
                    if (open != lin.terms.size())
                        return Truth::Unknown;
                    open = i;
                }
            if (open != lin.terms.size() && lin.terms[open].expr.kind() == NumExpr::Kind::Var) {
                Int rest = arith::sub(s.lo, parts[open].lo);
                Int c = lin.terms[open].coeff;
                bool possible = rest % c == 0 && _domains[lin.terms[open].expr.var_ref().index].contains(arith::sub(0, rest / c));
                if (! possible)
                    return lin.op == CmpOp::Eq ? Truth::False : Truth::True;
            }
            return Truth::Unknown;
        }
        switch (lin.op) {
        case CmpOp::Eq: return (s.lo == 0 && s.hi == 0) ? Truth::True : (s.contains(0) ? Truth::Unknown : Truth::False);
        case CmpOp::Ne: return (s.lo == 0 && s.hi == 0) ? Truth::False : (s.contains(0) ? Truth::Unknown : Truth::True);
        case CmpOp::Lt: return s.hi < 0 ? Truth::True : (s.lo >= 0 ? Truth::False : Truth::Unknown);
        case CmpOp::Le: return s.hi <= 0 ? Truth::True : (s.lo > 0 ? Truth::False : Truth::Unknown);
        case CmpOp::Gt: return s.lo > 0 ? Truth::True : (s.hi <= 0 ? Truth::False : Truth::Unknown);
        case CmpOp::Ge: return s.lo >= 0 ? Truth::True : (s.hi < 0 ? Truth::False : Truth::Unknown);
        }
        return Truth::Unknown;
    }

    auto filter_linear(const detail::LinearCmp & lin) -> bool
    {
        std::vector<arith::Range> parts;
        auto s = sum_bounds(lin, parts);

        if (lin.op == CmpOp::Ne) {
            if (s.lo == 0 && s.hi == 0)
                return fail_on(first_var(lin));
            // Only prune when exactly one term is still open and it is a variable.
            std::size_t open = lin.terms.size();
            for (std::size_t i = 0; i < lin.terms.size(); ++i)
                if (! parts[i].fixed()) {
                    if (open != lin.terms.size())
                        return true;
                    open = i;
                }
            if (open == lin.terms.size() || lin.terms[open].expr.kind() != NumExpr::Kind::Var)
                return true;
            Int rest = arith::sub(s.lo, parts[open].lo);
            Int c = lin.terms[open].coeff;
            if (rest % c != 0)
                return true;
            return remove_value(lin.terms[open].expr.var_ref().index, arith::sub(0, rest / c));
        }

        auto target = target_range(lin.op);
        if (s.lo > target.hi || s.hi < target.lo)
            return fail_on(first_var(lin));

        for (std::size_t i = 0; i < lin.terms.size(); ++i) {
            // c*t in [target.lo - (s.hi - part.hi), target.hi - (s.lo - part.lo)]
            Int lo = target.lo == arith::neg_inf ? arith::neg_inf : arith::sub(target.lo, arith::sub(s.hi, parts[i].hi));
            Int hi = target.hi == arith::pos_inf ? arith::pos_inf : arith::sub(target.hi, arith::sub(s.lo, parts[i].lo));
            if (! narrow_scaled(lin.terms[i].expr, lin.terms[i].coeff, lo, hi))
                return false;
        }
        return true;
    }

    /// Narrows e so that coeff * e lies in [lo, hi].
    auto narrow_scaled(const NumExpr & e, Int coeff, Int lo, Int hi) -> bool
    {
        Int elo = arith::neg_inf, ehi = arith::pos_inf;
        if (coeff > 0) {
            if (lo != arith::neg_inf)
                elo = arith::ceil_div(lo, coeff);
            if (hi != arith::pos_inf)
                ehi = arith::floor_div(hi, coeff);
        }
        else {
            if (hi != arith::pos_inf)
                elo = arith::ceil_div(hi, coeff);
            if (lo != arith::neg_inf)
                ehi = arith::floor_div(lo, coeff);
        }
        return narrow(e, elo, ehi);
    }

    /// Narrows the variables of e so that its value can lie in [lo, hi].
    auto narrow(const NumExpr & e, Int lo, Int hi) -> bool
    {
        auto b = bounds(e);
        if (lo <= b.lo && b.hi <= hi)
            return true;
        lo = std::max(lo, b.lo);
        hi = std::min(hi, b.hi);
        if (lo > hi)
            return fail_on(first_var(e));

        switch (e.kind()) {
        case NumExpr::Kind::Const: return true;
        case NumExpr::Kind::Var: {
            auto v = e.var_ref().index;
            return set_min(v, lo) && set_max(v, hi);
        }
        case NumExpr::Kind::WeightedSum: {
            detail::LinearCmp lin;
            lin.constant = e.offset();
            for (std::size_t i = 0; i < e.terms().size(); ++i)
                lin.terms.push_back({e.coeffs()[i], e.terms()[i]});
            std::vector<arith::Range> parts;
            auto s = sum_bounds(lin, parts);
            for (std::size_t i = 0; i < lin.terms.size(); ++i) {
                if (lin.terms[i].coeff == 0)
                    continue;
                Int tlo = arith::sub(lo, arith::sub(s.hi, parts[i].hi));
                Int thi = arith::sub(hi, arith::sub(s.lo, parts[i].lo));
                if (! narrow_scaled(lin.terms[i].expr, lin.terms[i].coeff, tlo, thi))
                    return false;
            }
            return true;
        }
        case NumExpr::Kind::Product: {
            const auto & a = e.terms()[0];
            const auto & c = e.terms()[1];
            if (! narrow_factor(a, c, lo, hi))
                return false;
            return narrow_factor(c, a, lo, hi);
        }
        case NumExpr::Kind::Min: {
            std::size_t candidates = 0, last = 0;
            for (std::size_t i = 0; i < e.terms().size(); ++i) {
                if (! narrow(e.terms()[i], lo, arith::pos_inf))
                    return false;
                if (bounds(e.terms()[i]).lo <= hi)
                    ++candidates, last = i;
            }
            if (candidates == 0)
                return fail_on(first_var(e));
            if (candidates == 1)
                return narrow(e.terms()[last], arith::neg_inf, hi);
            return true;
        }
        case NumExpr::Kind::Max: {
            std::size_t candidates = 0, last = 0;
            for (std::size_t i = 0; i < e.terms().size(); ++i) {
                if (! narrow(e.terms()[i], arith::neg_inf, hi))
                    return false;
                if (bounds(e.terms()[i]).hi >= lo)
                    ++candidates, last = i;
            }
            if (candidates == 0)
                return fail_on(first_var(e));
            if (candidates == 1)
                return narrow(e.terms()[last], lo, arith::pos_inf);
            return true;
        }
        }
        return true;
    }

    /// Product factor * other in [lo, hi] (finite): narrows factor using the
    /// sign-constant parts of other's range.
    auto narrow_factor(const NumExpr & factor, const NumExpr & other, Int lo, Int hi) -> bool
    {
        auto ob = bounds(other);
        bool zero_allowed = lo <= 0 && 0 <= hi;
        if (zero_allowed && ob.contains(0))
            return true;

        std::vector<arith::Range> pieces;
        if (ob.lo < 0)
            pieces.push_back({ob.lo, std::min<Int>(ob.hi, -1)});
        if (ob.hi > 0)
            pieces.push_back({std::max<Int>(ob.lo, 1), ob.hi});
        if (pieces.empty())
            return fail_on(first_var(other));

        Int new_lo = arith::pos_inf, new_hi = arith::neg_inf;
        for (const auto & p : pieces)
            for (Int num : {lo, hi})
                for (Int den : {p.lo, p.hi}) {
                    new_lo = std::min(new_lo, arith::ceil_div(num, den));
                    new_hi = std::max(new_hi, arith::floor_div(num, den));
                }
        return narrow(factor, new_lo, new_hi);
    }

    auto filter_element(const Element & k) -> bool
    {
        const Int n = static_cast<Int>(k.values.size());
        std::vector<Int> keep_index, keep_value;
        const auto & idx = _domains[k.index.index];
        const auto & res = _domains[k.result.index];
        for (const auto & iv : idx.intervals())
            for (Int i = std::max<Int>(iv.lo, 1); i <= std::min<Int>(iv.hi, n); ++i)
                if (res.contains(k.values[static_cast<std::size_t>(i - 1)])) {
                    keep_index.push_back(i);
                    keep_value.push_back(k.values[static_cast<std::size_t>(i - 1)]);
                }
        if (keep_index.empty())
            return fail_on(k.index.index);
        return intersect(k.index.index, IntervalSet::of(keep_index)) && intersect(k.result.index, IntervalSet::of(keep_value));
    }

    auto filter_table(const Table & k) -> bool
    {
        std::vector<std::vector<Int>> supported(k.vars.size());
        bool any = false;
        for (const auto & t : k.tuples) {
            bool ok = true;
            for (std::size_t i = 0; i < t.size() && ok; ++i)
                ok = _domains[k.vars[i].index].contains(t[i]);
            if (! ok)
                continue;
            any = true;
            for (std::size_t i = 0; i < t.size(); ++i)
                supported[i].push_back(t[i]);
        }
        if (! any)
            return fail_on(k.vars.empty() ? 0 : k.vars.front().index);
        for (std::size_t i = 0; i < k.vars.size(); ++i)
            if (! intersect(k.vars[i].index, IntervalSet::of(supported[i])))
                return false;
        return true;
    }

    auto filter_alldifferent(const AllDifferent & k) -> bool
    {
        for (std::size_t i = 0; i < k.vars.size(); ++i)
            for (std::size_t j = i + 1; j < k.vars.size(); ++j)
                if (k.vars[i].index == k.vars[j].index)
                    return fail_on(k.vars[i].index);
        bool again = true;
        while (again) {
            again = false;
            for (std::size_t i = 0; i < k.vars.size(); ++i) {
                auto vi = k.vars[i].index;
                if (! is_fixed(vi))
                    continue;
                Int value = _domains[vi].min();
                for (std::size_t j = 0; j < k.vars.size(); ++j) {
                    auto vj = k.vars[j].index;
                    if (j == i)
                        continue;
                    if (! _domains[vj].contains(value))
                        continue;
                    if (is_fixed(vj))
                        return fail_on(vj);
                    if (! remove_value(vj, value))
                        return false;
                    if (is_fixed(vj))
                        again = true;
                }
            }
        }
        return true;
    }

    auto filter_count(const Count & k) -> bool
    {
        Int fixed = 0, possible = 0;
        for (const auto & v : k.vars) {
            const auto & d = _domains[v.index];
            if (d.contains(k.value)) {
                ++possible;
                if (d.is_singleton())
                    ++fixed;
            }
        }
        bool upper = k.op == CmpOp::Le || k.op == CmpOp::Eq;
        bool lower = k.op == CmpOp::Ge || k.op == CmpOp::Eq;
        std::uint32_t witness = k.vars.empty() ? 0 : k.vars.front().index;
        if (upper && fixed > k.n)
            return fail_on(witness);
        if (lower && possible < k.n)
            return fail_on(witness);
        if (upper && fixed == k.n)
            for (const auto & v : k.vars)
                if (! is_fixed(v.index) && ! remove_value(v.index, k.value))
                    return false;
        if (lower && possible == k.n)
            for (const auto & v : k.vars)
                if (_domains[v.index].contains(k.value) && ! fix(v.index, k.value))
                    return false;
        return true;
    }

    auto truth(const detail::CompiledForm & f) const -> detail::Truth
    {
        using detail::Truth;
        using K = BoolForm::Kind;
        switch (f.kind) {
        case K::Atom: return truth(f.atom);
        case K::And: {
            bool all = true;
            for (const auto & c : f.children) {
                auto t = truth(c);
                if (t == Truth::False)
                    return Truth::False;
                all = all && t == Truth::True;
            }
            return all ? Truth::True : Truth::Unknown;
        }
        case K::Or: {
            bool none = true;
            for (const auto & c : f.children) {
                auto t = truth(c);
                if (t == Truth::True)
                    return Truth::True;
                none = none && t == Truth::False;
            }
            return none ? Truth::False : Truth::Unknown;
        }
        case K::Not: return detail::flip(truth(f.children[0]));
        case K::Implies: {
            auto a = truth(f.children[0]), b = truth(f.children[1]);
            if (a == Truth::False || b == Truth::True)
                return Truth::True;
            if (a == Truth::True && b == Truth::False)
                return Truth::False;
            return Truth::Unknown;
        }
        case K::Iff:
        case K::Xor: {
            auto a = truth(f.children[0]), b = truth(f.children[1]);
            if (a == Truth::Unknown || b == Truth::Unknown)
                return Truth::Unknown;
            bool same = a == b;
            return (f.kind == K::Iff) == same ? Truth::True : Truth::False;
        }
        }
        return Truth::Unknown;
    }

    /// Enforces f (positive) or its complement (negative).
    auto enforce(const detail::CompiledForm & f, bool positive) -> bool
    {
        using detail::Truth;
        using K = BoolForm::Kind;
        switch (f.kind) {
        case K::Atom: {
            if (positive)
                return filter_linear(f.atom);
            auto neg = f.atom;
            neg.op = negate(neg.op);
            return filter_linear(neg);
        }
        case K::And:
        case K::Or: {
            // And enforced positively / Or negatively: every child must hold (or fail).
            bool conjunctive = (f.kind == K::And) == positive;
            if (conjunctive) {
                for (const auto & c : f.children)
                    if (! enforce(c, positive))
                        return false;
                return true;
            }
            // Disjunctive: some child must reach `positive`; enforce it when it is the last one left.
            const Truth wanted = positive ? Truth::True : Truth::False;
            const Truth dead = positive ? Truth::False : Truth::True;
            const detail::CompiledForm * open = nullptr;
            std::size_t open_count = 0;
            for (const auto & c : f.children) {
                auto t = truth(c);
                if (t == wanted)
                    return true;
                if (t != dead)
                    open = &c, ++open_count;
            }
            if (open_count == 0)
                return fail_on(first_var_of(f));
            if (open_count == 1)
                return enforce(*open, positive);
            return true;
        }
        case K::Not: return enforce(f.children[0], ! positive);
        case K::Implies: {
            // a => b  ==  not a or b
            const auto & a = f.children[0];
            const auto & b = f.children[1];
            if (! positive)
                return enforce(a, true) && enforce(b, false);
            auto ta = truth(a), tb = truth(b);
            if (ta == Truth::False || tb == Truth::True)
                return true;
            if (ta == Truth::True)
                return enforce(b, true);
            if (tb == Truth::False)
                return enforce(a, false);
            return true;
        }
        case K::Iff:
        case K::Xor: {
            bool same = (f.kind == K::Iff) == positive;
            const auto & a = f.children[0];
            const auto & b = f.children[1];
            auto ta = truth(a);
            if (ta != Truth::Unknown && ! enforce(b, (ta == Truth::True) == same))
                return false;
            auto tb = truth(b);
            if (tb != Truth::Unknown && ! enforce(a, (tb == Truth::True) == same))
                return false;
            return true;
        }
        }
        return true;
    }

    auto first_var_of(const detail::CompiledForm & f) const -> std::uint32_t
    {
        if (f.kind == BoolForm::Kind::Atom)
            return first_var(f.atom);
        for (const auto & c : f.children)
            return first_var_of(c);
        return 0;
    }

    auto filter_reified(const detail::CompiledReified & k) -> bool
    {
        if (! set_min(k.b, 0) || ! set_max(k.b, 1))
            return false;
        auto t = truth(k.form);
        if (t == detail::Truth::True && ! fix(k.b, 1))
            return false;
        if (t == detail::Truth::False && ! fix(k.b, 0))
            return false;
        if (is_fixed(k.b))
            return enforce(k.form, _domains[k.b].min() == 1);
        return true;
    }

    std::vector<IntervalSet> _domains;
    std::vector<IntervalSet> _initial;
    std::vector<std::string> _names;
    std::vector<Entry> _constraints;
    std::vector<std::vector<std::size_t>> _subscriptions;
    std::vector<TrailEntry> _trail;
    std::vector<Level> _levels;
    std::deque<std::size_t> _queue;
    std::vector<bool> _in_queue;
    Status _status = Status::Consistent;
    std::optional<Failure> _failure;
    std::int64_t _cause = -1;
    std::uint64_t _serial = 0;
    std::uint64_t _changes = 0;
};

} // namespace featline::fd

#endif
