#include <catch_amalgamated.hpp>

#include <featline/fm/compile.hpp>

#include "support/fixtures.hpp"
#include "support/model_oracle.hpp"

#include <random>

using namespace featline;
using namespace featline::fm;

namespace {
    auto model_of(const std::string & text) -> FeatureModel
    {
        auto r = parse(text);
        INFO(text);
        for (const auto & e : r.errors)
            UNSCOPED_INFO(e.span.line << ":" << e.span.column << " " << e.message);
        for (const auto & d : r.diagnostics)
            UNSCOPED_INFO(d.code << " " << d.message);
        REQUIRE(r.valid());
        return r.model;
    }

    auto model_options(const CompiledModel & c) -> fd::SearchOptions
    {
        fd::SearchOptions o;
        o.branch_vars = c.vars.model_vars;
        return o;
    }

    auto project(const fd::Solution & s, const VarMap & vm) -> std::vector<Int>
    {
        std::vector<Int> out;
        for (const auto & v : vm.model_vars)
            out.push_back(s[v]);
        return out;
    }

    /// Walks the compiled solutions and the oracle's in lockstep (both lexicographic).
    auto matches_oracle(const FeatureModel & m, std::uint64_t & count) -> bool
    {
        auto c = compile(m);
        fd::Search search(c.store, model_options(c));
        bool same = true;
        count = 0;
        model_oracle::for_each_solution(m, [&](const model_oracle::Assignment & a) {
            auto s = search.next();
            if (! s || project(*s, c.vars) != a) {
                same = false;
                return false;
            }
            ++count;
            return true;
        });
        return same && ! search.next();
    }

    /// Random small models whose groups and cross dependencies stay within the supported forms.
    auto random_model(std::mt19937_64 & rng) -> std::string
    {
        auto pick = [&](int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng); };
        std::ostringstream os;
        os << "model R\nenum Col { red, green, blue }\nfeature F0\n";
        int n = 3 + pick(3);
        std::vector<int> max(n, 1), parent(n, -1);
        for (int i = 1; i < n; ++i) {
            parent[i] = pick(i);
            max[i] = pick(3) == 0 ? 2 : 1;
            os << "feature F" << i;
            if (max[i] > 1)
                os << " max " << max[i];
            os << " of F" << parent[i] << (pick(2) ? " mandatory" : " optional") << "\n";
            if (pick(3) == 0)
                os << "  attr a in " << (pick(2) ? "[0..2]" : "{red, blue}") << "\n";
        }
        // Group over the boolean children of a boolean parent.
        for (int p = 0; p < n; ++p) {
            std::vector<int> kids;
            for (int i = 1; i < n; ++i)
                if (parent[i] == p && max[i] == 1)
                    kids.push_back(i);
            if (max[p] == 1 && kids.size() >= 2 && pick(2)) {
                int lo = pick(2);
                int hi = lo + 1 + pick(static_cast<int>(kids.size()) - lo);
                hi = std::min<int>(hi, static_cast<int>(kids.size()));
                os << "group of F" << p << " [" << lo << ".." << hi << "] {";
                for (std::size_t k = 0; k < kids.size(); ++k)
                    os << (k ? ", " : " ") << "F" << kids[k];
                os << " }\n";
                break;
            }
        }
        int a = 1 + pick(n - 1), b = 1 + pick(n - 1);
        if (a != b) {
            switch (pick(3)) {
            case 0: os << "F" << a << " excludes F" << b << "\n"; break;
            case 1: os << "F" << a << " requires F" << b << "\n"; break;
            default: os << "F" << a << " requires F" << b << " per instance" << (pick(2) ? " + 1" : "") << "\n"; break;
            }
        }
        auto f = [&] { return "F" + std::to_string(pick(n)); };
        switch (pick(7)) {
        case 0: os << "constraint " << f() << " + " << f() << " <= 2\n"; break;
        case 1: os << "constraint choose(1, 2, [" << f() << ", " << f() << ", " << f() << "])\n"; break;
        case 2: os << "constraint atmost(1, [" << f() << ", " << f() << ", " << f() << "], 1)\n"; break;
        case 3: os << "constraint " << f() << " = 1 <=> (" << f() << " = 0 or " << f() << " >= 1)\n"; break;
        case 4: os << "constraint relation([" << f() << ", " << f() << "], [(0, 0), (1, 1), (1, 0), (2, 1)])\n"; break;
        case 5: os << "constraint not (" << f() << " = 1 and " << f() << " = 1) xor " << f() << " = 0\n"; break;
        default: os << "constraint max(" << f() << ", " << f() << ") - min(" << f() << ", 1) * 2 >= 0\n"; break;
        }
        return os.str();
    }
}

TEST_CASE("VMC compiles to exactly the oracle's configurations", "[compile][oracle]")
{
    auto m = model_of(read_fixture("vmc.fm"));
    std::uint64_t count = 0;
    CHECK(matches_oracle(m, count));
    CHECK(count == 289000);

    auto c = compile(m);
    fd::SearchOptions features;
    features.branch_vars = c.vars.feature_vars;
    CHECK(fd::count_solutions(c.store, 1'000'000, features).count == 57800);
}

TEST_CASE("STAGO compiles to exactly the oracle's configurations", "[compile][oracle]")
{
    auto m = model_of(read_fixture("stago.fm"));
    std::uint64_t count = 0;
    CHECK(matches_oracle(m, count));
    CHECK(count == 270720);
}

TEST_CASE("random models agree with the oracle", "[compile][oracle][property]")
{
    std::mt19937_64 rng(99);
    int checked = 0;
    for (int round = 0; round < 300; ++round) {
        auto text = random_model(rng);
        auto r = parse(text);
        INFO(text);
        REQUIRE(r.ok());
        if (! r.valid())
            continue;
        std::uint64_t count = 0;
        CHECK(matches_oracle(r.model, count));
        ++checked;
    }
    CHECK(checked >= 250);
}

TEST_CASE("hierarchy lowering", "[compile]")
{
    SECTION("mandatory child of a boolean parent shares its presence")
    {
        auto c = compile(model_of("model M\nfeature R\nfeature A of R mandatory\n"));
        CHECK(c.store.domain(c.vars.feature("A")) == IntervalSet::singleton(1));
    }
    SECTION("repeatable mandatory child of a boolean parent is at least one")
    {
        auto c = compile(model_of("model M\nfeature R\nfeature A max 3 of R mandatory\n"));
        CHECK(c.store.domain(c.vars.feature("A")) == IntervalSet::range(1, 3));
    }
    SECTION("one child instance per parent instance")
    {
        auto c = compile(model_of("model M\nfeature R\nfeature P max 3 of R optional\nfeature C max 3 of P mandatory\n"));
        CHECK(c.store.assign(c.vars.feature("P").index, 2));
        REQUIRE(c.store.propagate() == fd::Status::Consistent);
        CHECK(c.store.domain(c.vars.feature("C")) == IntervalSet::singleton(2));
    }
    SECTION("labels mirror the model text")
    {
        auto c = compile(model_of("model M\nfeature R\nfeature A of R optional\nfeature B of R optional\n"
                                  "group of R [1..1] { A, B }\nA excludes B\nconstraint A + B <= 1\n"));
        std::vector<std::string> labels;
        for (const auto & e : c.store.constraints())
            labels.push_back(e.label);
        CHECK(labels == std::vector<std::string>{"root R", "A of R optional", "B of R optional", "group of R [1..1] { A, B }",
                            "group of R [1..1] { A, B }", "A excludes B", "A + B <= 1"});
    }
}

TEST_CASE("groups keep optionality of an absent parent", "[compile]")
{
    auto m = model_of(read_fixture("vmc.fm"));
    auto c = compile(m);
    auto fb = c.vars.feature("Feedback").index;
    CHECK(c.store.domain(fb) == IntervalSet::range(0, 1));
    REQUIRE(c.store.assign(fb, 0));
    REQUIRE(c.store.propagate() == fd::Status::Consistent);
    for (const auto * n : {"Visual", "Audio", "Vibration"})
        CHECK(c.store.domain(c.vars.feature(n)) == IntervalSet::singleton(0));
}

TEST_CASE("exclusion propagates on VMC", "[compile]")
{
    auto c = compile(model_of(read_fixture("vmc.fm")));
    REQUIRE(c.store.restrict_domain(c.vars.feature("SpeedSensor").index, IntervalSet::range(1, 4)));
    REQUIRE(c.store.propagate() == fd::Status::Consistent);
    CHECK(c.store.domain(c.vars.feature("Vibration")) == IntervalSet::singleton(0));
}

TEST_CASE("configure-time constraints", "[compile]")
{
    auto m = model_of(read_fixture("vmc.fm"));
    auto c = compile(m);
    auto xor_expr = parse_expression("Visual + Audio = 1").expr;
    post_constraint(m, c.vars, c.store, xor_expr);
    std::vector<Int> both_seen;
    fd::Search search(c.store, model_options(c));
    std::uint64_t n = 0;
    while (auto s = search.next()) {
        ++n;
        CHECK(! ((*s)[c.vars.feature("Visual")] == 1 && (*s)[c.vars.feature("Audio")] == 1));
    }
    std::uint64_t oracle_n = 0;
    model_oracle::for_each_solution(m, [&](const model_oracle::Assignment &) { return ++oracle_n, true; }, {xor_expr});
    CHECK(n == oracle_n);

    CHECK_THROWS_AS(post_constraint(m, c.vars, c.store, parse_expression("not alldifferent(Visual, Audio)").expr), NotReifiable);
    CHECK_THROWS_AS(post_constraint(m, c.vars, c.store, parse_expression("Visual + (Audio = 1) = 1").expr), TypeError);
    CHECK_THROWS_AS(post_constraint(m, c.vars, c.store, parse_expression("Nowhere = 1").expr), TypeError);
}

TEST_CASE("STAGO reified test type forces both conclusions", "[compile]")
{
    auto m = model_of(read_fixture("stago.fm"));
    auto c = compile(m);
    REQUIRE(c.store.assign(c.vars.attribute("LaunchTest", "TestType").index, *m.code("TCA")));
    REQUIRE(c.store.propagate() == fd::Status::Consistent);
    CHECK(c.store.domain(c.vars.feature("Chronometric")) == IntervalSet::singleton(1));
    CHECK(c.store.domain(c.vars.attribute("Chronometric", "Speed")) == IntervalSet::singleton(*m.code("normal")));
}

TEST_CASE("goals lower to the oracle's objective", "[compile][goal]")
{
    auto m = model_of(read_fixture("stago.fm"));
    auto c = compile(m);
    REQUIRE(c.vars.goals.size() == 2);
    model_oracle::Space space = model_oracle::space(m);
    model_oracle::Evaluator ev(m, space);
    Int best_cost = std::numeric_limits<Int>::max(), best_revenue = std::numeric_limits<Int>::min();
    model_oracle::for_each_solution(m, [&](const model_oracle::Assignment & a) {
        best_cost = std::min(best_cost, ev.num(m.goal("cost")->expr, a));
        best_revenue = std::max(best_revenue, ev.num(m.goal("revenue")->expr, a));
        return true;
    });
    CHECK(best_cost == 2);
    CHECK(best_revenue == 18);
    CHECK(fd::optimize(c.store, c.vars.goals.at("cost"), fd::Direction::Minimize, model_options(c)).value == best_cost);
    CHECK(fd::optimize(c.store, c.vars.goals.at("revenue"), fd::Direction::Maximize, model_options(c)).value == best_revenue);

    auto g = lower_goal(m, c.vars, parse_expression("Stago + 2 * LaunchTest.TestDuration").expr);
    auto first = fd::solve(c.store);
    REQUIRE(first);
    CHECK(fd::evaluate(g, first->values) == 1 + 2 * (*first)[c.vars.attribute("LaunchTest", "TestDuration")]);
}

TEST_CASE("compilation is deterministic and rejects invalid models", "[compile]")
{
    auto m = model_of(read_fixture("stago.fm"));
    CHECK(emit_csp(compile(m)) == emit_csp(compile(m)));
    auto bad = parse("model M\nfeature R\nfeature X of Nowhere mandatory\n").model;
    CHECK_THROWS_AS(compile(bad), CompileError);
}

TEST_CASE("emit-csp golden output", "[compile][emit]")
{
    auto c = compile(model_of("model M\nfeature R\nfeature A max 2 of R optional\n  attr W in {1, 3}\n"
                              "feature B of R optional\nA requires B\nconstraint A.W >= 2 => B = 1\n"));
    CHECK(emit_csp(c) == "var R in [0..1]\n"
                         "var A in [0..2]\n"
                         "var A.W in {1, 3}\n"
                         "var B in [0..1]\n"
                         "var $c4 in {1}\n"
                         "var $c5 in {1}\n"
                         "R = 1\n"
                         "A <= 2*R\n"
                         "B <= R\n"
                         "$c4 <=> (A >= 1 => B >= 1)\n"
                         "$c5 <=> (A.W >= 2 => B = 1)\n");
}
