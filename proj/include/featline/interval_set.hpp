#ifndef FEATLINE_INTERVAL_SET_HPP
#define FEATLINE_INTERVAL_SET_HPP

#include <algorithm>
#include <cassert>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace featline {

using Int = std::int64_t;

/**
 * A finite set of integers stored as ordered, disjoint, non-adjacent
 * closed intervals. [lo1..hi1] [lo2..hi2] ... with hi(i) + 1 < lo(i+1).
 *
 * Mutators return true when the set actually changed.
 */
class IntervalSet
{
public:
    struct Interval
    {
        Int lo;
        Int hi;

        auto operator==(const Interval &) const -> bool = default;
    };

    IntervalSet() = default;

    static auto range(Int lo, Int hi) -> IntervalSet
    {
        IntervalSet s;
        if (lo <= hi)
            s._intervals.push_back({lo, hi});
        return s;
    }

    static auto singleton(Int v) -> IntervalSet { return range(v, v); }

    static auto of(std::span<const Int> values) -> IntervalSet
    {
        std::vector<Int> sorted(values.begin(), values.end());
        std::sort(sorted.begin(), sorted.end());
        sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
        IntervalSet s;
        for (Int v : sorted) {
            if (! s._intervals.empty() && s._intervals.back().hi != max_int && s._intervals.back().hi + 1 == v)
                s._intervals.back().hi = v;
            else
                s._intervals.push_back({v, v});
        }
        return s;
    }

    static auto of(std::initializer_list<Int> values) -> IntervalSet
    {
        return of(std::span<const Int>(values.begin(), values.size()));
    }

    /// Builds from arbitrary intervals (any order, overlapping allowed).
    static auto from_intervals(std::vector<Interval> parts) -> IntervalSet
    {
        std::erase_if(parts, [](const Interval & i) { return i.lo > i.hi; });
        std::sort(parts.begin(), parts.end(), [](const Interval & a, const Interval & b) { return a.lo < b.lo; });
        IntervalSet s;
        for (const auto & p : parts) {
            if (! s._intervals.empty() && (s._intervals.back().hi == max_int || s._intervals.back().hi + 1 >= p.lo))
                s._intervals.back().hi = std::max(s._intervals.back().hi, p.hi);
            else
                s._intervals.push_back(p);
        }
        return s;
    }

    auto empty() const -> bool { return _intervals.empty(); }
    auto min() const -> Int
    {
        assert(! empty());
        return _intervals.front().lo;
    }
    auto max() const -> Int
    {
        assert(! empty());
        return _intervals.back().hi;
    }
    auto is_singleton() const -> bool { return _intervals.size() == 1 && _intervals[0].lo == _intervals[0].hi; }

    /// Number of values, saturating at UINT64_MAX.
    auto size() const -> std::uint64_t
    {
        std::uint64_t total = 0;
        for (const auto & i : _intervals) {
            std::uint64_t width = static_cast<std::uint64_t>(i.hi) - static_cast<std::uint64_t>(i.lo);
            if (width == std::numeric_limits<std::uint64_t>::max())
                return width;
            width += 1;
            if (total > std::numeric_limits<std::uint64_t>::max() - width)
                return std::numeric_limits<std::uint64_t>::max();
            total += width;
        }
        return total;
    }

    auto contains(Int v) const -> bool
    {
        auto it = upper_bound_lo(v);
        if (it == _intervals.begin())
            return false;
        --it;
        return v <= it->hi;
    }

    auto intervals() const -> const std::vector<Interval> & { return _intervals; }

    /// Smallest member strictly greater than v, if any.
    auto next_above(Int v) const -> std::optional<Int>
    {
        if (v == max_int)
            return std::nullopt;
        for (const auto & i : _intervals)
            if (i.hi > v)
                return std::max(i.lo, v + 1);
        return std::nullopt;
    }

    /// Largest member strictly smaller than v, if any.
    auto next_below(Int v) const -> std::optional<Int>
    {
        if (v == min_int)
            return std::nullopt;
        for (auto it = _intervals.rbegin(); it != _intervals.rend(); ++it)
            if (it->lo < v)
                return std::min(it->hi, v - 1);
        return std::nullopt;
    }

    /// Keeps only values >= v.
    auto remove_below(Int v) -> bool
    {
        if (empty() || min() >= v)
            return false;
        auto it = std::find_if(_intervals.begin(), _intervals.end(), [&](const Interval & i) { return i.hi >= v; });
        _intervals.erase(_intervals.begin(), it);
        if (! _intervals.empty() && _intervals.front().lo < v)
            _intervals.front().lo = v;
        return true;
    }

    /// Keeps only values <= v.
    auto remove_above(Int v) -> bool
    {
        if (empty() || max() <= v)
            return false;
        auto it = std::find_if(_intervals.begin(), _intervals.end(), [&](const Interval & i) { return i.lo > v; });
        _intervals.erase(it, _intervals.end());
        if (! _intervals.empty() && _intervals.back().hi > v)
            _intervals.back().hi = v;
        return true;
    }

    auto remove(Int v) -> bool
    {
        auto it = upper_bound_lo(v);
        if (it == _intervals.begin())
            return false;
        --it;
        if (v > it->hi)
            return false;
        if (it->lo == it->hi)
            _intervals.erase(it);
        else if (v == it->lo)
            ++it->lo;
        else if (v == it->hi)
            --it->hi;
        else {
            Interval upper{v + 1, it->hi};
            it->hi = v - 1;
            _intervals.insert(it + 1, upper);
        }
        return true;
    }

    auto intersection(const IntervalSet & other) const -> IntervalSet
    {
        IntervalSet out;
        std::size_t a = 0, b = 0;
        while (a < _intervals.size() && b < other._intervals.size()) {
            const auto & x = _intervals[a];
            const auto & y = other._intervals[b];
            Int lo = std::max(x.lo, y.lo), hi = std::min(x.hi, y.hi);
            if (lo <= hi)
                out._intervals.push_back({lo, hi});
            if (x.hi < y.hi)
                ++a;
            else
                ++b;
        }
        return out;
    }

    auto intersect_with(const IntervalSet & other) -> bool
    {
        auto result = intersection(other);
        if (result == *this)
            return false;
        *this = std::move(result);
        return true;
    }

    auto is_subset_of(const IntervalSet & other) const -> bool { return intersection(other) == *this; }

    /// Calls f(v) for every member in ascending order. f returns false to stop.
    template <typename F>
    auto for_each_value(F && f) const -> void
    {
        for (const auto & i : _intervals)
            for (Int v = i.lo;; ++v) {
                if (! f(v))
                    return;
                if (v == i.hi)
                    break;
            }
    }

    auto values() const -> std::vector<Int>
    {
        std::vector<Int> out;
        for_each_value([&](Int v) {
            out.push_back(v);
            return true;
        });
        return out;
    }

    auto operator==(const IntervalSet &) const -> bool = default;

    /// "[0..4]" for a single range, "{5}" for a singleton, "{1..3, 5}" otherwise.
    auto to_string() const -> std::string
    {
        std::ostringstream os;
        if (_intervals.size() == 1 && _intervals[0].lo != _intervals[0].hi) {
            os << '[' << _intervals[0].lo << ".." << _intervals[0].hi << ']';
            return os.str();
        }
        os << '{';
        for (std::size_t k = 0; k < _intervals.size(); ++k) {
            if (k)
                os << ", ";
            if (_intervals[k].lo == _intervals[k].hi)
                os << _intervals[k].lo;
            else
                os << _intervals[k].lo << ".." << _intervals[k].hi;
        }
        os << '}';
        return os.str();
    }

private:
    static constexpr Int min_int = std::numeric_limits<Int>::min();
    static constexpr Int max_int = std::numeric_limits<Int>::max();

    auto upper_bound_lo(Int v) const -> std::vector<Interval>::const_iterator
    {
        return std::upper_bound(_intervals.begin(), _intervals.end(), v, [](Int x, const Interval & i) { return x < i.lo; });
    }
    auto upper_bound_lo(Int v) -> std::vector<Interval>::iterator
    {
        return std::upper_bound(_intervals.begin(), _intervals.end(), v, [](Int x, const Interval & i) { return x < i.lo; });
    }

    std::vector<Interval> _intervals;
};

} // namespace featline

#endif
