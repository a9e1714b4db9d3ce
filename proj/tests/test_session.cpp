#include <catch_amalgamated.hpp>

#include <featline/session.hpp>

#include "support/fixtures.hpp"
#include "support/model_oracle.hpp"

#include <random>

using namespace featline;
using namespace featline::fm;
using featline::session::Restriction;
using featline::session::Session;
using featline::session::Status;

namespace {
    auto model_of(const std::string & text) -> FeatureModel
    {
        auto r = parse(text);
        INFO(text);
        REQUIRE(r.valid());
        return r.model;
    }

    auto vmc() -> FeatureModel { return model_of(read_fixture("vmc.fm")); }

    auto status_of(Session & s, const std::string & name) -> Status
    {
        for (const auto & v : s.vars_view())
            if (v.name == name)
                return v.status();
        FAIL("no variable " << name);
        return Status::Open;
    }

    auto changed(const session::Outcome & o, const std::string & name) -> bool
    {
        return std::any_of(o.delta.begin(), o.delta.end(), [&](const session::VarView & v) { return v.name == name; });
    }

    /// Random decision or extra constraint over a model's variables.
    auto random_entry(std::mt19937_64 & rng, const Session & s) -> session::LogEntry
    {
        auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
        const auto & vars = s.vars().model_vars;
        const auto & v = vars[pick(vars.size())];
        const auto & d = s.store().initial_domain(v.index);
        auto values = d.values();
        Int x = values[pick(values.size())];
        if (pick(5) == 0) {
            const auto & w = vars[pick(vars.size())];
            const char * ops[] = {"=", "!=", "<=", ">="};
            return {session::LogEntry::Kind::Constraint, {}, {}, v.name + " " + ops[pick(4)] + " " + w.name};
        }
        switch (pick(4)) {
        case 0: return {session::LogEntry::Kind::Decide, v.name, Restriction::fix(x), {}};
        case 1: return {session::LogEntry::Kind::Decide, v.name, Restriction::at_least(x), {}};
        case 2: return {session::LogEntry::Kind::Decide, v.name, Restriction::at_most(x), {}};
        default: return {session::LogEntry::Kind::Decide, v.name, Restriction::in(IntervalSet::of({x, values[pick(values.size())]})), {}};
        }
    }

    auto apply(Session & s, const session::LogEntry & e) -> session::Outcome
    {
        return e.kind == session::LogEntry::Kind::Decide ? s.decide(e.name, e.restriction) : s.add_constraint(e.expr);
    }
}

TEST_CASE("status derives from the domain alone", "[session]")
{
    using session::VarView;
    CHECK(VarView{"F", true, IntervalSet::singleton(0)}.status() == Status::ForcedOut);
    CHECK(VarView{"F", true, IntervalSet::singleton(1)}.status() == Status::ForcedIn);
    CHECK(VarView{"F", true, IntervalSet::singleton(3)}.status() == Status::ForcedIn);
    CHECK(VarView{"F", true, IntervalSet::range(2, 4)}.status() == Status::ForcedIn);
    CHECK(VarView{"F", true, IntervalSet::range(0, 4)}.status() == Status::Open);
    CHECK(VarView{"F.a", false, IntervalSet::singleton(0)}.status() == Status::Fixed);
    CHECK(VarView{"F.a", false, IntervalSet::singleton(7)}.status() == Status::Fixed);
    CHECK(VarView{"F.a", false, IntervalSet::range(1, 4)}.status() == Status::Open);
}

TEST_CASE("start", "[session]")
{
    Session s(vmc());
    CHECK(status_of(s, "VMC") == Status::ForcedIn);
    CHECK(s.store().domain(s.vars().feature("VMC")) == IntervalSet::singleton(1));
    CHECK(status_of(s, "InternalMemory.Size") == Status::Open);
    auto view = s.view();
    CHECK(view.vars.size() == 20); // 19 features and one attribute
    CHECK(view.remaining.count == 10'000);
    CHECK_FALSE(view.remaining.exact);
    CHECK(s.log().empty());
    CHECK_THROWS_AS(Session(model_of("model M\nfeature R\nconstraint R = 0\n")), VoidModel);
    CHECK_THROWS_AS(Session(model_of("model M\nfeature R\nfeature A max 3 of R mandatory\nconstraint A * 2 = 3\n")), VoidModel);
}

TEST_CASE("decisions propagate and report their delta", "[session]")
{
    Session s(vmc());
    auto o = s.decide("SpeedSensor", Restriction::at_least(1));
    REQUIRE(o.ok());
    CHECK(status_of(s, "Vibration") == Status::ForcedOut);
    CHECK(changed(o, "Vibration"));
    CHECK(changed(o, "SpeedSensor"));
    CHECK_FALSE(changed(o, "Visual"));
    CHECK(status_of(s, "SpeedSensor") == Status::ForcedIn);

    auto same = s.decide("SpeedSensor", Restriction::at_least(1));
    CHECK(same.ok());
    CHECK(same.delta.empty());
    CHECK(s.log().size() == 2);
    CHECK_THROWS_AS(s.decide("Nope", Restriction::fix(1)), UnknownName);
    CHECK(s.log().size() == 2);
}

TEST_CASE("the XOR extra constraint is the culprit of a conflict", "[session]")
{
    Session s(vmc());
    REQUIRE(s.add_constraint("Visual + Audio = 1").ok());
    REQUIRE(s.decide("Visual", Restriction::fix(1)).ok());
    auto before = s.store().domains();
    auto o = s.decide("Audio", Restriction::fix(1));
    REQUIRE_FALSE(o.ok());
    CHECK(o.conflict->culprit == "Visual + Audio = 1");
    CHECK(o.conflict->variable == "Audio");
    CHECK(o.conflict->action == "decide Audio = 1");
    CHECK(s.store().domains() == before);
    CHECK(s.log().size() == 2);

    // Culprit when propagation itself fails.
    Session t(vmc());
    REQUIRE(t.decide("Visual", Restriction::fix(1)).ok());
    REQUIRE(t.decide("Audio", Restriction::fix(1)).ok());
    auto c = t.add_constraint("Visual + Audio = 1");
    REQUIRE_FALSE(c.ok());
    CHECK(c.conflict->culprit == "Visual + Audio = 1");
}

TEST_CASE("configure-time constraints", "[session]")
{
    SECTION("alldifferent over attributes")
    {
        auto m = model_of("model M\nfeature R\nfeature F1 of R mandatory\n  attr A in [1..3]\nfeature F2 of R mandatory\n  attr A in [1..3]\n"
                          "feature F3 of R mandatory\n  attr A in [1..3]\n");
        Session s(m);
        auto alldiff = parse_expression("alldifferent(F1.A, F2.A, F3.A)").expr;
        REQUIRE(s.add_constraint(alldiff).ok());
        REQUIRE(s.decide("F1.A", Restriction::fix(1)).ok());
        REQUIRE(s.decide("F2.A", Restriction::fix(2)).ok());
        CHECK(s.store().domain(s.vars().attribute("F3", "A")) == IntervalSet::singleton(3));
        std::vector<analysis::Configuration> got;
        Session all(m);
        REQUIRE(all.add_constraint(alldiff).ok());
        while (auto c = all.next_solution())
            got.push_back(*c);
        CHECK(got.size() == model_oracle::solutions(m, {alldiff}).size());
        CHECK(got.size() == 6);
    }
    SECTION("exactly zero forces every listed feature out")
    {
        Session s(vmc());
        auto o = s.add_constraint("exactly(0, [SpeedSensor, SensorAutoTest, Vibration], 1) and SpeedSensor + SensorAutoTest + Vibration = 0");
        REQUIRE(o.ok());
        for (const auto * n : {"SpeedSensor", "SensorAutoTest", "Vibration", "ConsistencyCheck"})
            CHECK(status_of(s, n) == Status::ForcedOut);
    }
    SECTION("a tautology changes nothing")
    {
        Session s(vmc());
        auto o = s.add_constraint("VMC >= 0");
        CHECK(o.ok());
        CHECK(o.delta.empty());
    }
    SECTION("errors leave the session untouched")
    {
        Session s(vmc());
        auto before = s.store().domains();
        CHECK_THROWS_AS(s.add_constraint("Visual + "), ParseError);
        CHECK_THROWS_AS(s.add_constraint("Visual + Nope = 1"), TypeError);
        CHECK_THROWS_AS(s.add_constraint("not alldifferent(Visual, Audio)"), NotReifiable);
        CHECK(s.store().domains() == before);
        CHECK(s.log().empty());
        CHECK(s.store().open_levels() == 0);
    }
}

TEST_CASE("undo", "[session]")
{
    Session s(vmc());
    auto v0 = s.vars_view();
    REQUIRE(s.decide("SpeedSensor", Restriction::at_least(1)).ok());
    auto v1 = s.vars_view();
    REQUIRE(s.decide("Visual", Restriction::fix(1)).ok());
    auto back = s.undo(1);
    CHECK(s.vars_view() == v1);
    CHECK(changed(back, "Visual"));
    REQUIRE(s.decide("Visual", Restriction::fix(1)).ok());
    s.undo(2);
    CHECK(s.vars_view() == v0);
    CHECK(s.log().empty());
    REQUIRE(s.decide("SpeedSensor", Restriction::at_least(1)).ok());
    REQUIRE(s.decide("Visual", Restriction::fix(1)).ok());
    CHECK_THROWS_AS(s.undo(5), OutOfRange);
    CHECK_THROWS_AS(s.undo(0), OutOfRange);
    CHECK(s.log().size() == 2);
}

TEST_CASE("solution iteration", "[session]")
{
    auto m = vmc();
    Session s(m);
    auto first = s.next_solution();
    REQUIRE(first);
    // The first configuration equals the oracle's first.
    std::optional<model_oracle::Assignment> oracle_first;
    model_oracle::for_each_solution(m, [&](const model_oracle::Assignment & a) {
        oracle_first = a;
        return false;
    });
    REQUIRE(oracle_first);
    std::vector<Int> values;
    for (const auto & kv : first->values)
        values.push_back(kv.second);
    CHECK(values == *oracle_first);

    std::set<std::vector<std::pair<std::string, Int>>> seen{first->values};
    for (int i = 0; i < 50; ++i) {
        auto next = s.next_solution();
        REQUIRE(next);
        CHECK(seen.insert(next->values).second);
    }
    CHECK(s.log().empty());

    // A decision restarts the iteration; solutions honour it.
    REQUIRE(s.decide("Visual", Restriction::fix(1)).ok());
    for (int i = 0; i < 20; ++i) {
        auto n = s.next_solution();
        REQUIRE(n);
        CHECK(n->at("Visual") == 1);
    }

    // Unique solution: one answer, then exhausted.
    Session u(model_of("model M\nfeature R\nfeature A max 3 of R optional\n"));
    REQUIRE(u.decide("A", Restriction::fix(2)).ok());
    CHECK(u.next_solution());
    CHECK_FALSE(u.next_solution());
    CHECK_FALSE(u.interrupted());
    CHECK_FALSE(u.next_solution());
}

TEST_CASE("an interrupted iteration resumes without repeating", "[session]")
{
    auto m = model_of("model M\nfeature R\nfeature A max 3 of R optional\nfeature B max 3 of R optional\n");
    Session plain(m), budgeted(m);
    std::vector<analysis::Configuration> expected;
    while (auto c = plain.next_solution())
        expected.push_back(*c);
    REQUIRE(expected.size() == 16);

    // Stops every third poll: each call may need several attempts.
    int polls = 0;
    analysis::Budget flaky{std::nullopt, [&] { return ++polls % 3 == 0; }};
    std::vector<analysis::Configuration> got;
    int interruptions = 0;
    for (int guard = 0; guard < 1000; ++guard) {
        auto c = budgeted.next_solution(flaky);
        if (c)
            got.push_back(*c);
        else if (budgeted.interrupted())
            ++interruptions;
        else
            break;
    }
    CHECK(interruptions > 0);
    CHECK(got == expected);
}

TEST_CASE("optimize inside a session", "[session]")
{
    auto m = model_of(read_fixture("stago.fm"));
    Session s(m);
    CHECK(s.optimize("cost").value == 2);
    REQUIRE(s.decide("LaunchTest.TestType", Restriction::fix(*m.code("TT"))).ok());
    auto r = s.optimize("cost");
    CHECK(r.solution.at("LaunchTest.TestType") == *m.code("TT"));
    // TT forces duration 3 and cadence 2, so at least six wells at cost one each.
    Int best = std::numeric_limits<Int>::max();
    auto space = model_oracle::space(m);
    model_oracle::Evaluator ev(m, space);
    model_oracle::for_each_solution(m, [&](const model_oracle::Assignment & a) {
        if (a[space.index.at("LaunchTest.TestType")] == *m.code("TT"))
            best = std::min(best, ev.num(m.goal("cost")->expr, a));
        return true;
    });
    CHECK(r.value == best);
    CHECK(s.log().size() == 1);
    CHECK_THROWS_AS(s.optimize("nope"), UnknownGoal);

    REQUIRE(s.decide("LaunchTest.TestType", Restriction::fix(*m.code("TCA"))).ok() == false);
}

TEST_CASE("STAGO: deciding TestType = TCA forces both conclusions", "[session]")
{
    auto m = model_of(read_fixture("stago.fm"));
    Session s(m);
    auto o = s.decide("LaunchTest.TestType", Restriction::fix(*m.code("TCA")));
    REQUIRE(o.ok());
    CHECK(status_of(s, "Chronometric") == Status::ForcedIn);
    CHECK(status_of(s, "Chronometric.Speed") == Status::Fixed);
    CHECK(s.store().domain(s.vars().feature("Chronometric")) == IntervalSet::singleton(1));
    CHECK(s.store().domain(s.vars().attribute("Chronometric", "Speed")) == IntervalSet::singleton(*m.code("normal")));
    CHECK(changed(o, "Chronometric.Speed"));
}

TEST_CASE("log export and replay", "[session][json]")
{
    Session s(vmc());
    REQUIRE(s.decide("SpeedSensor", Restriction::at_least(1)).ok());
    REQUIRE(s.add_constraint("Visual + Audio = 1").ok());
    REQUIRE(s.decide("InternalMemory.Size", Restriction::in(IntervalSet::of({64, 512}))).ok());
    auto log = s.export_log();
    CHECK(log.dump() == R"([{"kind":"decide","name":"SpeedSensor","restriction":{"kind":"at_least","value":1}},)"
                        R"({"kind":"constraint","expr":"Visual + Audio = 1"},)"
                        R"({"kind":"decide","name":"InternalMemory.Size","restriction":{"kind":"in","domain":[[64,64],[512,512]]}}])");
    Session r(vmc());
    r.replay(Json::parse(log.dump()));
    CHECK(r.vars_view() == s.vars_view());
    CHECK(r.log() == s.log());

    Session bad(vmc());
    REQUIRE(bad.decide("Visual", Restriction::fix(1)).ok());
    REQUIRE(bad.decide("Audio", Restriction::fix(1)).ok());
    CHECK_THROWS_AS(bad.replay(Json::parse(R"([{"kind":"constraint","expr":"Visual + Audio = 1"}])")), InvalidArgument);
    CHECK_THROWS_AS(bad.replay(Json::parse(R"([{"kind":"decide","name":"Visual"}])")), InvalidArgument);
    CHECK_THROWS_AS(Restriction::from_json(Json::parse(R"({"kind":"between","value":1})")), InvalidArgument);
}

TEST_CASE("property: replay determinism", "[session][property]")
{
    std::mt19937_64 rng(41);
    const FeatureModel models[] = {vmc(), model_of(read_fixture("stago.fm"))};
    for (int round = 0; round < 200; ++round) {
        const auto & m = models[round % 2];
        Session live(m);
        std::vector<std::vector<session::VarView>> views{live.vars_view()};
        for (int step = 0; step < 6; ++step) {
            auto e = random_entry(rng, live);
            if (apply(live, e).ok())
                views.push_back(live.vars_view());
        }
        Session replayed(m);
        REQUIRE(replayed.vars_view() == views[0]);
        std::size_t i = 1;
        for (const auto & j : live.export_log()) {
            replayed.replay(session::LogEntry::from_json(j));
            CHECK(replayed.vars_view() == views[i++]);
        }
        CHECK(replayed.log() == live.log());
    }
}

TEST_CASE("property: rejection atomicity and decide/undo inverse", "[session][property]")
{
    std::mt19937_64 rng(43);
    const FeatureModel models[] = {vmc(), model_of(read_fixture("stago.fm"))};
    int rejections = 0, acceptances = 0;
    for (int round = 0; round < 300; ++round) {
        Session s(models[round % 2]);
        for (int step = 0; step < 8; ++step) {
            auto domains = s.store().domains();
            auto log_size = s.log().size();
            auto levels = s.store().open_levels();
            auto e = random_entry(rng, s);
            auto o = apply(s, e);
            if (! o.ok()) {
                ++rejections;
                CHECK(s.store().domains() == domains);
                CHECK(s.log().size() == log_size);
                CHECK(s.store().open_levels() == levels);
                CHECK(s.store().status() == fd::Status::Consistent);
                continue;
            }
            ++acceptances;
            if (step % 3 == 2) {
                s.undo(1);
                CHECK(s.store().domains() == domains);
            }
        }
    }
    CHECK(rejections >= 200);
    CHECK(acceptances >= 200);
}

TEST_CASE("property: iterated solutions satisfy the log", "[session][property]")
{
    std::mt19937_64 rng(47);
    auto m = model_of(read_fixture("stago.fm"));
    for (int round = 0; round < 200; ++round) {
        Session s(m);
        std::vector<Expr> extra;
        for (int step = 0; step < 3; ++step) {
            auto e = random_entry(rng, s);
            if (! apply(s, e).ok())
                continue;
            if (e.kind == session::LogEntry::Kind::Constraint)
                extra.push_back(parse_expression(e.expr).expr);
            else {
                // Decision as an equivalent expression over the variable.
                auto ref = parse_expression(e.name).expr;
                auto allowed = e.restriction.allowed();
                auto lo = Expr::make(Expr::Kind::Compare, {ref, parse_expression(std::to_string(allowed.min())).expr});
                lo.op = fd::CmpOp::Ge;
                auto hi = Expr::make(Expr::Kind::Compare, {ref, parse_expression(std::to_string(allowed.max())).expr});
                hi.op = fd::CmpOp::Le;
                extra.push_back(lo);
                extra.push_back(hi);
                if (e.restriction.kind == Restriction::Kind::In && allowed.intervals().size() > 1) {
                    Int hole_lo = allowed.intervals()[0].hi + 1, hole_hi = allowed.intervals()[1].lo - 1;
                    auto below = Expr::make(Expr::Kind::Compare, {ref, parse_expression(std::to_string(hole_lo)).expr});
                    below.op = fd::CmpOp::Lt;
                    auto above = Expr::make(Expr::Kind::Compare, {ref, parse_expression(std::to_string(hole_hi)).expr});
                    above.op = fd::CmpOp::Gt;
                    extra.push_back(Expr::make(Expr::Kind::Or, {below, above}));
                }
            }
        }
        auto space = model_oracle::space(m);
        model_oracle::Evaluator ev(m, space);
        for (int k = 0; k < 5; ++k) {
            auto c = s.next_solution();
            if (! c)
                break;
            model_oracle::Assignment a;
            for (const auto & kv : c->values)
                a.push_back(kv.second);
            for (const auto & x : extra)
                CHECK(ev.truth(x, a));
        }
    }
}
