#ifndef FEATLINE_CLI_HPP
#define FEATLINE_CLI_HPP

#include <featline/service.hpp>

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace featline::cli {

enum ExitCode : int
{
    Ok = 0,
    Negative = 1, // void model, invalid model, no solution
    Usage = 2,    // bad arguments, unreadable file, syntax error
    Internal = 3
};

namespace detail {

    struct Failure
    {
        int code;
        std::string message;
    };

    inline auto read_file(const std::string & path) -> std::string
    {
        std::ifstream in(path, std::ios::binary);
        if (! in)
            throw Failure{Usage, "cannot read '" + path + "'"};
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    /// Parses and validates; syntax errors exit 2 and structural diagnostics exit 1.
    inline auto load(const std::string & path, std::ostream & err) -> fm::FeatureModel
    {
        auto r = fm::parse(read_file(path));
        for (const auto & e : r.errors)
            err << path << ":" << e.span.line << ":" << e.span.column << ": error: " << e.message << "\n";
        if (! r.ok())
            throw Failure{Usage, ""};
        for (const auto & d : r.diagnostics)
            err << path << ":" << d.span.line << ":" << d.span.column << ": " << d.code << ": " << d.message << "\n";
        if (! r.valid())
            throw Failure{Negative, ""};
        return std::move(r.model);
    }

    inline auto configuration_text(const analysis::Configuration & c) -> std::string
    {
        std::string s;
        for (const auto & [n, v] : c.values)
            s += (s.empty() ? "" : " ") + n + "=" + std::to_string(v);
        return s;
    }

    inline auto join(const std::vector<std::string> & xs) -> std::string
    {
        std::string s;
        for (const auto & x : xs)
            s += (s.empty() ? "" : ", ") + x;
        return s.empty() ? "(none)" : s;
    }

    inline auto default_cap() -> std::uint64_t
    {
        const char * v = std::getenv("FEATLINE_CAP");
        if (! v || ! *v)
            return analysis::default_count_cap;
        char * end = nullptr;
        auto n = std::strtoull(v, &end, 10);
        if (*end != '\0' || n == 0)
            throw Failure{Usage, "FEATLINE_CAP must be a positive integer"};
        return n;
    }

} // namespace detail

/**
 * Runs one command line (args exclude the program name). Structured output
 * goes to out, diagnostics to err. Returns an ExitCode.
 */
inline auto run(const std::vector<std::string> & args, std::ostream & out, std::ostream & err) -> int
{
    CLI::App app{"Feature-model analysis and configuration over a finite-domain solver", "featline"};
    app.require_subcommand(1);

    std::string file, var_order = "declaration", value_order = "ascending", project = "all", goal;
    bool json = false;
    std::uint64_t cap = 0, limit = 10;
    int port = 8080;
    std::string host = "127.0.0.1";

    auto add_common = [&](CLI::App * cmd, bool strategy) {
        cmd->add_option("file", file, "Model file (.fm)")->required();
        cmd->add_flag("--json", json, "Print a JSON report");
        if (strategy) {
            cmd->add_option("--var-order", var_order, "declaration | first-fail")
                ->check(CLI::IsMember({"declaration", "first-fail"}));
            cmd->add_option("--value-order", value_order, "ascending | descending")
                ->check(CLI::IsMember({"ascending", "descending"}));
        }
    };

    auto * check = app.add_subcommand("check", "Validate a model and test whether it is void");
    add_common(check, false);
    auto * count = app.add_subcommand("count", "Count configurations");
    add_common(count, false);
    count->add_option("--cap", cap, "Stop counting at this many (default 1000000 or FEATLINE_CAP)")->check(CLI::PositiveNumber);
    count->add_option("--project", project, "all | features")->check(CLI::IsMember({"all", "features"}));
    auto * enumerate = app.add_subcommand("enumerate", "List configurations");
    add_common(enumerate, true);
    enumerate->add_option("--limit", limit, "Maximum number of configurations")->check(CLI::PositiveNumber);
    auto * optimize = app.add_subcommand("optimize", "Optimize a declared goal");
    add_common(optimize, true);
    optimize->add_option("--goal", goal, "Goal name")->required();
    auto * solve = app.add_subcommand("solve", "Print the first configuration");
    add_common(solve, true);
    auto * analyze = app.add_subcommand("analyze", "Report core and dead features");
    add_common(analyze, false);
    auto * emit = app.add_subcommand("emit-csp", "Print the compiled constraint problem");
    emit->add_option("file", file, "Model file (.fm)")->required();
    auto * serve = app.add_subcommand("serve", "Run the HTTP service");
    serve->add_option("--port", port, "TCP port")->check(CLI::Range(1, 65535));
    serve->add_option("--host", host, "Bind address");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    }
    catch (const CLI::ParseError & e) {
        return app.exit(e, out, err) == 0 ? Ok : Usage;
    }

    auto report = [&](const analysis::AnalysisReport & r) { out << r.json(false).dump(2) << "\n"; };

    try {
        if (app.got_subcommand(serve)) {
            service::Server server;
            if (! server.bind(host, port))
                throw detail::Failure{Usage, "cannot bind " + host + ":" + std::to_string(port)};
            err << "featline listening on http://" << host << ":" << port << "\n";
            server.listen_after_bind();
            return Ok;
        }

        auto model = detail::load(file, err);
        Json params = {{"var_order", var_order}, {"value_order", value_order}};

        if (app.got_subcommand(check)) {
            bool is_void = analysis::is_void(model);
            if (json)
                report({"check", {{"valid", true}, {"void", is_void}, {"diagnostics", Json::array()}}, 0});
            else
                out << (is_void ? "valid, void" : "valid, not void") << "\n";
            return is_void ? Negative : Ok;
        }
        if (app.got_subcommand(count)) {
            auto r = analysis::run(model, "count", {{"cap", cap ? cap : detail::default_cap()}, {"project", project}});
            if (json)
                report(r);
            else
                out << (r.result["exact"].get<bool>() ? "" : "at least ") << r.result["count"].dump() << "\n";
            return Ok;
        }
        if (app.got_subcommand(enumerate)) {
            params["limit"] = limit;
            auto e = analysis::enumerate(model, limit, {analysis::parse_var_order(var_order), analysis::parse_value_order(value_order)});
            if (json) {
                Json list = Json::array();
                for (const auto & s : e.solutions)
                    list.push_back(s.json());
                report({"enumerate", {{"solutions", list}, {"complete", e.complete}}, 0});
            }
            else
                for (const auto & s : e.solutions)
                    out << detail::configuration_text(s) << "\n";
            return e.solutions.empty() ? Negative : Ok;
        }
        if (app.got_subcommand(solve)) {
            auto r = analysis::run(model, "solve", params);
            bool found = ! r.result["solution"].is_null();
            if (json)
                report(r);
            else if (found)
                out << detail::configuration_text(*analysis::first_configuration(
                           model, {analysis::parse_var_order(var_order), analysis::parse_value_order(value_order)}))
                    << "\n";
            else
                out << "no configuration\n";
            return found ? Ok : Negative;
        }
        if (app.got_subcommand(optimize)) {
            try {
                auto g = analysis::optimize_goal(model, goal, {analysis::parse_var_order(var_order), analysis::parse_value_order(value_order)});
                if (json)
                    report({"optimize", analysis::goal_json(g), 0});
                else
                    out << g.goal << " = " << g.value << "\n" << detail::configuration_text(g.solution) << "\n";
                return Ok;
            }
            catch (const Unsatisfiable & e) {
                if (json)
                    out << error_json(e.code(), e.what()).dump(2) << "\n";
                else
                    out << "no configuration\n";
                return Negative;
            }
        }
        if (app.got_subcommand(analyze)) {
            try {
                auto cd = analysis::core_and_dead(model);
                if (json)
                    report({"core_dead", {{"core", cd.core}, {"dead", cd.dead}, {"complete", cd.complete}}, 0});
                else
                    out << "core: " << detail::join(cd.core) << "\ndead: " << detail::join(cd.dead) << "\n";
                return Ok;
            }
            catch (const VoidModel & e) {
                if (json)
                    out << error_json(e.code(), e.what()).dump(2) << "\n";
                else
                    out << "void model\n";
                return Negative;
            }
        }
        if (app.got_subcommand(emit)) {
            out << fm::emit_csp(fm::compile(model));
            return Ok;
        }
    }
    catch (const detail::Failure & f) {
        if (! f.message.empty())
            err << "featline: " << f.message << "\n";
        return f.code;
    }
    catch (const UnknownGoal & e) {
        err << "featline: " << e.what() << "\n";
        return Usage;
    }
    catch (const InvalidArgument & e) {
        err << "featline: " << e.what() << "\n";
        return Usage;
    }
    catch (const std::exception & e) {
        err << "featline: internal error: " << e.what() << "\n";
        return Internal;
    }
    return Usage;
}

} // namespace featline::cli

#endif
