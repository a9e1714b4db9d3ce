#ifndef FEATLINE_JSON_HPP
#define FEATLINE_JSON_HPP

#include <featline/error.hpp>
#include <featline/fm/ast.hpp>
#include <featline/interval_set.hpp>

#include <json.hpp>

namespace featline {

using Json = nlohmann::ordered_json;

/// Largest magnitude a JSON client can hold exactly in a double.
inline constexpr Int json_safe_max = (Int{1} << 53) - 1;

/// Integers beyond the double-exact range travel as decimal strings.
inline auto int_json(Int v) -> Json
{
    if (v > json_safe_max || v < -json_safe_max)
        return std::to_string(v);
    return v;
}

inline auto int_from_json(const Json & j) -> Int
{
    if (j.is_number_integer())
        return j.get<Int>();
    if (j.is_string()) {
        const auto & s = j.get_ref<const std::string &>();
        std::size_t used = 0;
        Int v = 0;
        try {
            v = std::stoll(s, &used);
        }
        catch (const std::exception &) {
            throw InvalidArgument("'" + s + "' is not a 64-bit integer");
        }
        if (used != s.size())
            throw InvalidArgument("'" + s + "' is not a 64-bit integer");
        return v;
    }
    throw InvalidArgument("expected an integer, found " + j.dump());
}

/// Domain as a list of closed [lo, hi] intervals.
inline auto domain_json(const IntervalSet & d) -> Json
{
    Json out = Json::array();
    for (const auto & i : d.intervals())
        out.push_back(Json::array({int_json(i.lo), int_json(i.hi)}));
    return out;
}

inline auto domain_from_json(const Json & j) -> IntervalSet
{
    if (! j.is_array())
        throw InvalidArgument("a domain is a list of [lo, hi] intervals");
    std::vector<IntervalSet::Interval> parts;
    for (const auto & i : j) {
        if (! i.is_array() || i.size() != 2)
            throw InvalidArgument("a domain is a list of [lo, hi] intervals");
        parts.push_back({int_from_json(i[0]), int_from_json(i[1])});
    }
    return IntervalSet::from_intervals(std::move(parts));
}

inline auto diagnostic_json(const fm::Diagnostic & d) -> Json
{
    return {{"code", d.code}, {"message", d.message}, {"span", {{"line", d.span.line}, {"column", d.span.column}}}};
}

/// ApiError body shared by the CLI and the service.
inline auto error_json(const std::string & code, const std::string & message) -> Json
{
    return {{"error", {{"code", code}, {"message", message}}}};
}

} // namespace featline

#endif
