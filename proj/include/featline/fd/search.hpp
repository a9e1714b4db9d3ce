#ifndef FEATLINE_FD_SEARCH_HPP
#define FEATLINE_FD_SEARCH_HPP

#include <featline/fd/evaluate.hpp>
#include <featline/fd/store.hpp>

#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <vector>

namespace featline::fd {

enum class VarOrder
{
    DeclarationOrder,
    FirstFail
};

enum class ValueOrder
{
    Ascending,
    Descending
};

struct Strategy
{
    VarOrder var_order = VarOrder::DeclarationOrder;
    ValueOrder value_order = ValueOrder::Ascending;
};

struct Solution
{
    std::vector<Int> values;

    auto operator[](const VarRef & v) const -> Int { return values.at(v.index); }
    auto operator==(const Solution &) const -> bool = default;
    auto operator<(const Solution & o) const -> bool { return values < o.values; }
};

struct SearchOptions
{
    Strategy strategy;
    /// Variables to branch on; empty means all. Solutions are then distinct
    /// on these variables, and the remaining ones get the first completion.
    std::vector<VarRef> branch_vars;
    /// Polled at every node; returning true interrupts the search.
    std::function<bool()> should_stop;
};

/**
 * Depth-first labeling with chronological backtracking over a Store.
 *
 * Each branch point pushes a level and assigns var = v; on backtrack the
 * level is popped and v is removed from var in the parent. The store is
 * returned to its pre-search state once the search is exhausted, abandoned
 * or destroyed.
 */
class Search
{
public:
    explicit Search(Store & store, SearchOptions options = {}) :
        _store(store),
        _options(std::move(options))
    {
        if (_options.branch_vars.empty())
            for (std::uint32_t v = 0; v < _store.num_vars(); ++v)
                _branch.push_back(v);
        else
            for (const auto & v : _options.branch_vars)
                _branch.push_back(v.index);
        _full_branching = _branch.size() == _store.num_vars();
    }

    Search(const Search &) = delete;
    auto operator=(const Search &) -> Search & = delete;

    ~Search() { abandon(); }

    /// Called at every node after propagation; returning false prunes it.
    auto set_node_filter(std::function<bool(Store &)> filter) -> void { _node_filter = std::move(filter); }

    auto next() -> std::optional<Solution>
    {
        if (_done)
            return std::nullopt;
        bool resumed = false;
        if (! _started) {
            _started = true;
            _base = _store.push_level();
            if (! settle()) {
                finish();
                return std::nullopt;
            }
        }
        else if (_interrupted) {
            _interrupted = false; // resume where the interruption left off
            resumed = true;
        }
        else if (! backtrack())
            return finish();

        // A resumed call takes one step before polling, so every call makes progress.
        for (bool poll = ! resumed;; poll = true) {
            if (poll && _options.should_stop && _options.should_stop()) {
                _interrupted = true;
                return std::nullopt;
            }
            auto var = select();
            if (! var) {
                if (auto s = leaf())
                    return s;
                if (_interrupted)
                    return std::nullopt;
                if (! backtrack())
                    return finish();
                continue;
            }
            const auto & d = _store.domain(*var);
            Int value = _options.strategy.value_order == ValueOrder::Ascending ? d.min() : d.max();
            _frames.push_back({*var, value, _store.push_level()});
            ++_nodes;
            if (! (_store.assign(*var, value) && settle()) && ! backtrack())
                return finish();
        }
    }

    auto abandon() -> void
    {
        _completion.reset();
        if (_started && ! _done) {
            _frames.clear();
            _store.pop_to(_base);
        }
        _done = true;
    }

    auto exhausted() const -> bool { return _done && ! _interrupted; }
    /// The last next() stopped on should_stop. The search stays open; calling next() again resumes it.
    auto interrupted() const -> bool { return _interrupted; }
    auto nodes() const -> std::uint64_t { return _nodes; }

private:
    struct Frame
    {
        std::uint32_t var;
        Int value;
        LevelId level;
    };

    auto finish() -> std::optional<Solution>
    {
        abandon();
        return std::nullopt;
    }

    auto settle() -> bool
    {
        if (_store.propagate() != Status::Consistent)
            return false;
        if (! _node_filter)
            return true;
        while (true) {
            auto before = _store.change_count();
            if (! _node_filter(_store) || _store.propagate() != Status::Consistent)
                return false;
            if (_store.change_count() == before)
                return true;
        }
    }

    auto backtrack() -> bool
    {
        while (! _frames.empty()) {
            auto f = _frames.back();
            _frames.pop_back();
            _store.pop_to(f.level);
            if (_store.exclude(f.var, f.value) && settle())
                return true;
        }
        return false;
    }

    auto select() const -> std::optional<std::uint32_t>
    {
        std::optional<std::uint32_t> best;
        std::uint64_t best_size = std::numeric_limits<std::uint64_t>::max();
        for (auto v : _branch) {
            if (_store.is_fixed(v))
                continue;
            if (_options.strategy.var_order == VarOrder::DeclarationOrder)
                return v;
            auto size = _store.domain(v).size();
            if (size < best_size)
                best = v, best_size = size;
        }
        return best;
    }

    auto leaf() -> std::optional<Solution>
    {
        if (_full_branching) {
            Solution s;
            for (const auto & d : _store.domains())
                s.values.push_back(d.min());
            return s;
        }
        // Branch variables fixed; look for any completion of the others.
        // Kept across interruptions so a resumed next() continues it.
        if (! _completion) {
            SearchOptions inner;
            inner.strategy = _options.strategy;
            inner.should_stop = _options.should_stop;
            _completion = std::make_unique<Search>(_store, inner);
            if (_node_filter)
                _completion->set_node_filter(_node_filter);
        }
        auto s = _completion->next();
        if (_completion->interrupted())
            _interrupted = true;
        else
            _completion.reset();
        return s;
    }

    Store & _store;
    SearchOptions _options;
    std::vector<std::uint32_t> _branch;
    bool _full_branching = false;
    std::function<bool(Store &)> _node_filter;
    std::vector<Frame> _frames;
    std::unique_ptr<Search> _completion; // inner search over non-branch vars at a leaf
    LevelId _base;
    bool _started = false;
    bool _done = false;
    bool _interrupted = false;
    std::uint64_t _nodes = 0;
};

struct CountResult
{
    std::uint64_t count = 0;
    bool exact = true;
};

/// Counts solutions up to cap (distinct on options.branch_vars when given).
inline auto count_solutions(Store & store, std::uint64_t cap, SearchOptions options = {}) -> CountResult
{
    if (cap == 0)
        throw InvalidArgument("count cap must be at least 1");
    Search search(store, std::move(options));
    CountResult result;
    while (search.next()) {
        if (++result.count == cap) {
            search.abandon();
            result.exact = false;
            return result;
        }
    }
    result.exact = ! search.interrupted();
    return result;
}

/// Convenience: first solution, store restored afterwards.
inline auto solve(Store & store, SearchOptions options = {}) -> std::optional<Solution>
{
    Search search(store, std::move(options));
    return search.next();
}

struct Optimum
{
    Solution solution;
    Int value = 0;
    /// False when the search was interrupted before optimality was proven.
    bool proven = true;
};

/**
 * Branch-and-bound in a single search tree: once an incumbent of value v is
 * found, every later node must satisfy objective < v (or > v when
 * maximizing). Throws Unsatisfiable when the store has no solution.
 */
inline auto optimize(Store & store, const NumExpr & objective, Direction direction, SearchOptions options = {}) -> Optimum
{
    std::optional<Optimum> best;
    Search search(store, std::move(options));
    search.set_node_filter([&](Store & s) {
        if (! best)
            return true;
        CmpOp op = direction == Direction::Minimize ? CmpOp::Lt : CmpOp::Gt;
        return s.filter_once(Cmp{objective, op, NumExpr::constant(best->value)});
    });
    while (auto solution = search.next()) {
        Int value = evaluate(objective, solution->values);
        best = Optimum{std::move(*solution), value, true};
    }
    if (! best)
        throw Unsatisfiable(search.interrupted() ? "no solution found within the time budget" : "no solution exists");
    best->proven = ! search.interrupted();
    return *best;
}

} // namespace featline::fd

#endif
