#ifndef FEATLINE_FD_ARITH_HPP
#define FEATLINE_FD_ARITH_HPP

#include <featline/error.hpp>
#include <featline/interval_set.hpp>

#include <algorithm>
#include <limits>

namespace featline::fd::arith {

inline constexpr Int neg_inf = std::numeric_limits<Int>::min();
inline constexpr Int pos_inf = std::numeric_limits<Int>::max();

inline auto add(Int a, Int b) -> Int
{
    Int r;
    if (__builtin_add_overflow(a, b, &r))
        throw IntegerOverflow("integer overflow in bound computation");
    return r;
}

inline auto sub(Int a, Int b) -> Int
{
    Int r;
    if (__builtin_sub_overflow(a, b, &r))
        throw IntegerOverflow("integer overflow in bound computation");
    return r;
}

inline auto mul(Int a, Int b) -> Int
{
    Int r;
    if (__builtin_mul_overflow(a, b, &r))
        throw IntegerOverflow("integer overflow in bound computation");
    return r;
}

inline auto abs(Int a) -> Int { return a < 0 ? sub(0, a) : a; }

inline auto floor_div(Int a, Int b) -> Int
{
    if (b == -1)
        return sub(0, a);
    Int q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0)))
        --q;
    return q;
}

inline auto ceil_div(Int a, Int b) -> Int
{
    if (b == -1)
        return sub(0, a);
    Int q = a / b;
    if ((a % b != 0) && ((a < 0) == (b < 0)))
        ++q;
    return q;
}

/// Closed integer range; lo may be neg_inf and hi pos_inf meaning unbounded.
struct Range
{
    Int lo = neg_inf;
    Int hi = pos_inf;

    auto empty() const -> bool { return lo > hi; }
    auto contains(Int v) const -> bool { return lo <= v && v <= hi; }
    auto fixed() const -> bool { return lo == hi; }
};

/// c * [lo, hi] for a finite range.
inline auto scale(Int c, Range r) -> Range
{
    Int a = mul(c, r.lo), b = mul(c, r.hi);
    return {std::min(a, b), std::max(a, b)};
}

inline auto product(Range a, Range b) -> Range
{
    Int c1 = mul(a.lo, b.lo), c2 = mul(a.lo, b.hi), c3 = mul(a.hi, b.lo), c4 = mul(a.hi, b.hi);
    return {std::min({c1, c2, c3, c4}), std::max({c1, c2, c3, c4})};
}

} // namespace featline::fd::arith

#endif
