#ifndef FEATLINE_FM_PARSER_HPP
#define FEATLINE_FM_PARSER_HPP

#include <featline/fm/ast.hpp>

#include <array>
#include <cctype>
#include <sstream>
#include <string_view>

namespace featline::fm {

struct ParseResult
{
    FeatureModel model;
    /// Syntax errors. The model is usable only when this is empty.
    std::vector<Diagnostic> errors;
    /// Structural diagnostics from validate_model.
    std::vector<Diagnostic> diagnostics;

    auto ok() const -> bool { return errors.empty(); }
    auto valid() const -> bool { return errors.empty() && diagnostics.empty(); }
};

struct ExprResult
{
    Expr expr;
    std::vector<Diagnostic> errors;

    auto ok() const -> bool { return errors.empty(); }
};

namespace detail {

    enum class Tok
    {
        Ident,
        Int,
        Keyword,
        Punct,
        End,
        Bad
    };

    struct Token
    {
        Tok kind = Tok::End;
        std::string text;
        std::uint64_t magnitude = 0; // Int tokens; may be 2^63 (only valid negated)
        SourceSpan span;
    };

    inline constexpr std::array keywords{"model", "enum", "feature", "max", "min", "of", "mandatory", "optional", "attr", "in", "group",
        "requires", "excludes", "per", "instance", "constraint", "minimize", "maximize", "goal", "and", "or", "not", "xor",
        "alldifferent", "atmost", "atleast", "exactly", "relation", "choose"};

    inline auto is_keyword(std::string_view s) -> bool
    {
        return std::find(keywords.begin(), keywords.end(), s) != keywords.end();
    }

    class Lexer
    {
    public:
        explicit Lexer(std::string_view text) : _text(text) {}

        auto tokens(std::vector<Diagnostic> & errors) -> std::vector<Token>
        {
            std::vector<Token> out;
            for (;;) {
                skip_space();
                Token t;
                t.span = {_line, _col, _pos, _pos};
                if (_pos >= _text.size()) {
                    out.push_back(t);
                    return out;
                }
                unsigned char c = static_cast<unsigned char>(_text[_pos]);
                if (std::isalpha(c) || c == '_') {
                    while (_pos < _text.size() && (std::isalnum(static_cast<unsigned char>(_text[_pos])) || _text[_pos] == '_'))
                        advance();
                    t.text = std::string(_text.substr(t.span.begin, _pos - t.span.begin));
                    t.kind = is_keyword(t.text) ? Tok::Keyword : Tok::Ident;
                }
                else if (std::isdigit(c)) {
                    bool overflow = false;
                    while (_pos < _text.size() && std::isdigit(static_cast<unsigned char>(_text[_pos]))) {
                        std::uint64_t d = static_cast<std::uint64_t>(_text[_pos] - '0');
                        if (t.magnitude > (std::uint64_t{1} << 63) / 10 ||
                            t.magnitude * 10 + d > (std::uint64_t{1} << 63))
                            overflow = true;
                        else
                            t.magnitude = t.magnitude * 10 + d;
                        advance();
                    }
                    t.text = std::string(_text.substr(t.span.begin, _pos - t.span.begin));
                    t.kind = Tok::Int;
                    if (overflow) {
                        t.span.end = _pos;
                        errors.push_back({"syntax", "integer literal '" + t.text + "' is out of range", t.span});
                        t.magnitude = 0;
                    }
                }
                else {
                    static constexpr std::array two{"..", "!=", "<>", "<=", ">=", "=>"};
                    if (_text.substr(_pos, 3) == "<=>") {
                        t.text = "<=>";
                    }
                    else {
                        for (const auto * p : two)
                            if (_text.substr(_pos, 2) == p)
                                t.text = p;
                        if (t.text.empty() && std::string_view("{}[](),.:+-*=<>").find(static_cast<char>(c)) != std::string_view::npos)
                            t.text = std::string(1, static_cast<char>(c));
                    }
                    if (t.text.empty()) {
                        advance();
                        t.kind = Tok::Bad;
                        t.text = std::string(1, static_cast<char>(c));
                    }
                    else {
                        for (std::size_t i = 0; i < t.text.size(); ++i)
                            advance();
                        t.kind = Tok::Punct;
                    }
                }
                t.span.end = _pos;
                out.push_back(std::move(t));
            }
        }

    private:
        auto advance() -> void
        {
            if (_text[_pos] == '\n') {
                ++_line;
                _col = 1;
            }
            else
                ++_col;
            ++_pos;
        }

        auto skip_space() -> void
        {
            while (_pos < _text.size()) {
                char c = _text[_pos];
                if (c == '#') {
                    while (_pos < _text.size() && _text[_pos] != '\n')
                        advance();
                }
                else if (std::isspace(static_cast<unsigned char>(c)))
                    advance();
                else
                    break;
            }
        }

        std::string_view _text;
        std::size_t _pos = 0;
        std::size_t _line = 1;
        std::size_t _col = 1;
    };

    struct SyntaxError
    {
    };

    class Parser
    {
    public:
        static constexpr int max_depth = 200;

        explicit Parser(std::string_view text) { _tokens = Lexer(text).tokens(_errors); }

        auto model() -> ParseResult
        {
            ParseResult r;
            try {
                expect_keyword("model");
                r.model.name = ident("model name");
            }
            catch (SyntaxError &) {
                if (! starts_item())
                    sync();
            }
            while (peek().kind != Tok::End) {
                std::size_t start = _i;
                try {
                    item(r.model);
                }
                catch (SyntaxError &) {
                    if (_i == start)
                        next();
                    sync();
                }
            }
            r.errors = std::move(_errors);
            if (r.errors.empty())
                r.diagnostics = validate_model(r.model);
            return r;
        }

        auto expression() -> ExprResult
        {
            ExprResult r;
            try {
                if (is_keyword("constraint"))
                    next();
                r.expr = expr();
                if (peek().kind != Tok::End)
                    fail("unexpected '" + peek().text + "' after expression");
            }
            catch (SyntaxError &) {
            }
            r.errors = std::move(_errors);
            return r;
        }

    private:
        // ---- token helpers ----

        auto peek(std::size_t ahead = 0) const -> const Token &
        {
            std::size_t i = std::min(_i + ahead, _tokens.size() - 1);
            return _tokens[i];
        }
        auto next() -> const Token &
        {
            const Token & t = peek();
            if (_i < _tokens.size() - 1)
                ++_i;
            return t;
        }
        auto is_keyword(std::string_view k, std::size_t ahead = 0) const -> bool
        {
            return peek(ahead).kind == Tok::Keyword && peek(ahead).text == k;
        }
        auto is_punct(std::string_view p, std::size_t ahead = 0) const -> bool
        {
            return peek(ahead).kind == Tok::Punct && peek(ahead).text == p;
        }

        [[noreturn]] auto fail(std::string message) -> void
        {
            _errors.push_back({"syntax", std::move(message), peek().span});
            throw SyntaxError{};
        }
        auto describe(const Token & t) const -> std::string
        {
            switch (t.kind) {
            case Tok::End: return "end of input";
            case Tok::Bad: return "invalid character '" + t.text + "'";
            default: return "'" + t.text + "'";
            }
        }
        auto expect_keyword(std::string_view k) -> void
        {
            if (! is_keyword(k))
                fail("expected '" + std::string(k) + "', found " + describe(peek()));
            next();
        }
        auto expect(std::string_view p) -> void
        {
            if (! is_punct(p))
                fail("expected '" + std::string(p) + "', found " + describe(peek()));
            next();
        }
        auto ident(const char * what) -> std::string
        {
            if (peek().kind != Tok::Ident)
                fail(std::string("expected ") + what + ", found " + describe(peek()));
            return next().text;
        }
        auto integer() -> Int
        {
            bool negative = false;
            if (is_punct("-")) {
                next();
                negative = true;
            }
            if (peek().kind != Tok::Int)
                fail("expected an integer, found " + describe(peek()));
            return to_int(next(), negative);
        }
        auto to_int(const Token & t, bool negative) -> Int
        {
            if (t.magnitude == (std::uint64_t{1} << 63)) {
                if (negative)
                    return std::numeric_limits<Int>::min();
                _errors.push_back({"syntax", "integer literal '" + t.text + "' is out of range", t.span});
                throw SyntaxError{};
            }
            auto v = static_cast<Int>(t.magnitude);
            return negative ? -v : v;
        }
        auto literal() -> Literal
        {
            if (peek().kind == Tok::Ident)
                return {std::nullopt, next().text};
            return {integer(), {}};
        }

        auto starts_item() const -> bool
        {
            for (auto k : {"model", "enum", "feature", "group", "constraint", "minimize", "maximize"})
                if (is_keyword(k))
                    return true;
            return peek().kind == Tok::Ident && (is_keyword("requires", 1) || is_keyword("excludes", 1));
        }

        /// Skips to the next token that can begin an item.
        auto sync() -> void
        {
            while (peek().kind != Tok::End && ! starts_item())
                next();
        }

        // ---- items ----

        auto item(FeatureModel & m) -> void
        {
            auto start = peek().span;
            if (is_keyword("enum"))
                return enum_decl(m);
            if (is_keyword("feature"))
                return feature(m);
            if (is_keyword("group"))
                return group(m);
            if (is_keyword("constraint")) {
                next();
                auto e = expr();
                m.constraints.push_back(std::move(e));
                return;
            }
            if (is_keyword("minimize") || is_keyword("maximize")) {
                Goal g;
                g.span = start;
                g.direction = next().text == "minimize" ? fd::Direction::Minimize : fd::Direction::Maximize;
                expect_keyword("goal");
                g.name = ident("goal name");
                expect(":");
                g.expr = expr();
                m.goals.push_back(std::move(g));
                return;
            }
            if (peek().kind == Tok::Ident)
                return cross(m);
            if (is_keyword("model"))
                fail("'model' may appear only once, at the start");
            fail("expected a model item, found " + describe(peek()));
        }

        auto enum_decl(FeatureModel & m) -> void
        {
            EnumDecl e;
            e.span = next().span;
            e.name = ident("enum name");
            expect("{");
            e.codes.push_back(ident("code name"));
            while (is_punct(",")) {
                next();
                e.codes.push_back(ident("code name"));
            }
            expect("}");
            m.enums.push_back(std::move(e));
        }

        auto feature(FeatureModel & m) -> void
        {
            Feature f;
            f.span = next().span;
            f.name = ident("feature name");
            if (is_keyword("max")) {
                next();
                f.max_count = integer();
            }
            if (is_keyword("of")) {
                next();
                f.parent = ident("parent feature name");
                if (is_keyword("mandatory"))
                    f.edge = Edge::Mandatory;
                else if (is_keyword("optional"))
                    f.edge = Edge::Optional;
                else
                    fail("expected 'mandatory' or 'optional', found " + describe(peek()));
                next();
            }
            while (is_keyword("attr")) {
                AttributeDecl a;
                a.span = next().span;
                a.name = ident("attribute name");
                expect_keyword("in");
                if (is_punct("[")) {
                    next();
                    a.domain.is_range = true;
                    a.domain.lo = integer();
                    expect("..");
                    a.domain.hi = integer();
                    expect("]");
                }
                else if (is_punct("{")) {
                    next();
                    a.domain.is_range = false;
                    a.domain.values.push_back(literal());
                    while (is_punct(",")) {
                        next();
                        a.domain.values.push_back(literal());
                    }
                    expect("}");
                }
                else
                    fail("expected '[' or '{' to start a domain, found " + describe(peek()));
                f.attributes.push_back(std::move(a));
            }
            m.features.push_back(std::move(f));
        }

        auto group(FeatureModel & m) -> void
        {
            Group g;
            g.span = next().span;
            expect_keyword("of");
            g.parent = ident("group parent");
            expect("[");
            g.min = integer();
            expect("..");
            g.max = integer();
            expect("]");
            expect("{");
            g.members.push_back(ident("group member"));
            while (is_punct(",")) {
                next();
                g.members.push_back(ident("group member"));
            }
            expect("}");
            m.groups.push_back(std::move(g));
        }

        auto cross(FeatureModel & m) -> void
        {
            CrossDep d;
            d.span = peek().span;
            d.from = ident("feature name");
            if (is_keyword("requires"))
                d.kind = CrossDep::Kind::Requires;
            else if (is_keyword("excludes"))
                d.kind = CrossDep::Kind::Excludes;
            else
                fail("expected 'requires' or 'excludes' after '" + d.from + "', found " + describe(peek()));
            next();
            d.to = ident("feature name");
            if (is_keyword("per")) {
                next();
                expect_keyword("instance");
                d.semantics = CrossDep::Semantics::PerInstance;
                if (is_punct("+")) {
                    next();
                    d.offset = integer();
                }
            }
            m.cross_deps.push_back(std::move(d));
        }

        // ---- expressions ----

        struct Depth
        {
            Parser & p;
            explicit Depth(Parser & parser) : p(parser)
            {
                if (p._depth >= max_depth)
                    p.fail("expression nested too deeply");
                ++p._depth;
            }
            ~Depth() { --p._depth; }
        };

        auto binary(Expr::Kind k, Expr l, Expr r, SourceSpan span) -> Expr
        {
            return Expr::make(k, {std::move(l), std::move(r)}, span);
        }

        auto expr() -> Expr { return iff(); }

        auto iff() -> Expr
        {
            Depth d(*this);
            auto l = implies();
            while (is_punct("<=>")) {
                auto span = next().span;
                l = binary(Expr::Kind::Iff, std::move(l), implies(), span);
            }
            return l;
        }

        auto implies() -> Expr
        {
            Depth d(*this);
            auto l = disjunction();
            if (is_punct("=>")) {
                auto span = next().span;
                return binary(Expr::Kind::Implies, std::move(l), implies(), span);
            }
            return l;
        }

        auto disjunction() -> Expr
        {
            auto l = exclusive();
            while (is_keyword("or")) {
                auto span = next().span;
                l = binary(Expr::Kind::Or, std::move(l), exclusive(), span);
            }
            return l;
        }

        auto exclusive() -> Expr
        {
            auto l = conjunction();
            while (is_keyword("xor")) {
                auto span = next().span;
                l = binary(Expr::Kind::Xor, std::move(l), conjunction(), span);
            }
            return l;
        }

        auto conjunction() -> Expr
        {
            auto l = negation();
            while (is_keyword("and")) {
                auto span = next().span;
                l = binary(Expr::Kind::And, std::move(l), negation(), span);
            }
            return l;
        }

        auto negation() -> Expr
        {
            Depth d(*this);
            if (is_keyword("not")) {
                auto span = next().span;
                return Expr::make(Expr::Kind::Not, {negation()}, span);
            }
            return comparison();
        }

        auto comparison() -> Expr
        {
            auto l = additive();
            static constexpr std::array<std::pair<const char *, fd::CmpOp>, 7> ops{{{"=", fd::CmpOp::Eq},
                {"!=", fd::CmpOp::Ne}, {"<>", fd::CmpOp::Ne}, {"<", fd::CmpOp::Lt}, {"<=", fd::CmpOp::Le},
                {">", fd::CmpOp::Gt}, {">=", fd::CmpOp::Ge}}};
            for (const auto & [text, op] : ops)
                if (is_punct(text)) {
                    auto span = next().span;
                    auto e = binary(Expr::Kind::Compare, std::move(l), additive(), span);
                    e.op = op;
                    return e;
                }
            return l;
        }

        auto additive() -> Expr
        {
            auto l = multiplicative();
            while (is_punct("+") || is_punct("-")) {
                auto k = peek().text == "+" ? Expr::Kind::Add : Expr::Kind::Sub;
                auto span = next().span;
                l = binary(k, std::move(l), multiplicative(), span);
            }
            return l;
        }

        auto multiplicative() -> Expr
        {
            auto l = unary();
            while (is_punct("*")) {
                auto span = next().span;
                l = binary(Expr::Kind::Mul, std::move(l), unary(), span);
            }
            return l;
        }

        auto unary() -> Expr
        {
            Depth d(*this);
            if (is_punct("-")) {
                auto span = next().span;
                if (peek().kind == Tok::Int) {
                    Expr e;
                    e.kind = Expr::Kind::Number;
                    e.number = to_int(next(), true);
                    e.span = span;
                    return e;
                }
                return Expr::make(Expr::Kind::Neg, {unary()}, span);
            }
            return primary();
        }

        auto reference() -> Expr
        {
            Expr e;
            e.span = peek().span;
            e.name = ident("feature or attribute reference");
            e.kind = Expr::Kind::Name;
            if (is_punct(".")) {
                next();
                e.kind = Expr::Kind::AttrRef;
                e.attr = ident("attribute name");
            }
            return e;
        }

        auto reference_list(bool allow_bare) -> std::vector<Expr>
        {
            std::vector<Expr> out;
            bool bracket = is_punct("[");
            if (! bracket && ! allow_bare)
                fail("expected '[' to start a reference list, found " + describe(peek()));
            if (bracket)
                next();
            if (! (bracket && is_punct("]"))) {
                out.push_back(reference());
                while (is_punct(",") && (bracket || peek(1).kind == Tok::Ident)) {
                    next();
                    out.push_back(reference());
                }
            }
            if (bracket)
                expect("]");
            return out;
        }

        auto tuple() -> std::vector<Literal>
        {
            std::string close = is_punct("(") ? ")" : "]";
            if (! is_punct("(") && ! is_punct("["))
                fail("expected '(' to start a tuple, found " + describe(peek()));
            next();
            std::vector<Literal> t{literal()};
            while (is_punct(",")) {
                next();
                t.push_back(literal());
            }
            expect(close);
            return t;
        }

        auto primary() -> Expr
        {
            const Token & t = peek();
            if (t.kind == Tok::Int) {
                Expr e;
                e.kind = Expr::Kind::Number;
                e.span = t.span;
                e.number = to_int(next(), false);
                return e;
            }
            if (t.kind == Tok::Ident)
                return reference();
            if (is_punct("(")) {
                next();
                auto e = expr();
                expect(")");
                return e;
            }
            if (t.kind == Tok::Keyword) {
                auto span = t.span;
                std::string k = t.text;
                if (k == "min" || k == "max") {
                    next();
                    expect("(");
                    std::vector<Expr> args{expr()};
                    while (is_punct(",")) {
                        next();
                        args.push_back(expr());
                    }
                    expect(")");
                    return Expr::make(k == "min" ? Expr::Kind::Min : Expr::Kind::Max, std::move(args), span);
                }
                if (k == "alldifferent") {
                    next();
                    expect("(");
                    auto e = Expr::make(Expr::Kind::AllDifferent, reference_list(true), span);
                    expect(")");
                    return e;
                }
                if (k == "atmost" || k == "atleast" || k == "exactly") {
                    next();
                    expect("(");
                    Expr e;
                    e.kind = k == "atmost" ? Expr::Kind::AtMost : (k == "atleast" ? Expr::Kind::AtLeast : Expr::Kind::Exactly);
                    e.span = span;
                    e.n = literal();
                    expect(",");
                    e.args = reference_list(false);
                    expect(",");
                    e.m = literal();
                    expect(")");
                    return e;
                }
                if (k == "choose") {
                    next();
                    expect("(");
                    Expr e;
                    e.kind = Expr::Kind::Choose;
                    e.span = span;
                    e.n = literal();
                    expect(",");
                    e.m = literal();
                    expect(",");
                    e.args = reference_list(false);
                    expect(")");
                    return e;
                }
                if (k == "relation") {
                    next();
                    expect("(");
                    Expr e;
                    e.kind = Expr::Kind::Relation;
                    e.span = span;
                    e.args = reference_list(false);
                    expect(",");
                    expect("[");
                    if (! is_punct("]")) {
                        e.tuples.push_back(tuple());
                        while (is_punct(",")) {
                            next();
                            e.tuples.push_back(tuple());
                        }
                    }
                    expect("]");
                    expect(")");
                    return e;
                }
            }
            fail("expected an expression, found " + describe(t));
        }

        std::vector<Token> _tokens;
        std::size_t _i = 0;
        int _depth = 0;
        std::vector<Diagnostic> _errors;
    };

    // ---- printing ----

    inline auto precedence(const Expr & e) -> int
    {
        using K = Expr::Kind;
        switch (e.kind) {
        case K::Iff: return 1;
        case K::Implies: return 2;
        case K::Or: return 3;
        case K::Xor: return 4;
        case K::And: return 5;
        case K::Not: return 6;
        case K::Compare: return 7;
        case K::Add:
        case K::Sub: return 8;
        case K::Mul: return 9;
        case K::Neg: return 10;
        case K::Number: return e.number < 0 ? 10 : 11;
        default: return 11;
        }
    }

    inline auto op_text(const Expr & e) -> std::string
    {
        using K = Expr::Kind;
        switch (e.kind) {
        case K::Iff: return "<=>";
        case K::Implies: return "=>";
        case K::Or: return "or";
        case K::Xor: return "xor";
        case K::And: return "and";
        case K::Add: return "+";
        case K::Sub: return "-";
        case K::Mul: return "*";
        case K::Compare: return fd::to_string(e.op);
        default: return "";
        }
    }

    inline auto print(const Expr & e, std::ostream & os) -> void;

    inline auto print_child(const Expr & child, bool parens, std::ostream & os) -> void
    {
        if (parens)
            os << '(';
        print(child, os);
        if (parens)
            os << ')';
    }

    inline auto print_refs(const std::vector<Expr> & refs, std::ostream & os) -> void
    {
        os << '[';
        for (std::size_t i = 0; i < refs.size(); ++i) {
            if (i)
                os << ", ";
            print(refs[i], os);
        }
        os << ']';
    }

    inline auto print(const Expr & e, std::ostream & os) -> void
    {
        using K = Expr::Kind;
        int p = precedence(e);
        switch (e.kind) {
        case K::Number: os << e.number; return;
        case K::Name: os << e.name; return;
        case K::AttrRef: os << e.name << '.' << e.attr; return;
        case K::Neg:
            os << '-';
            // "-(3)" keeps Neg(3) distinct from the literal -3.
            print_child(e.args[0], precedence(e.args[0]) <= p || e.args[0].kind == K::Number, os);
            return;
        case K::Not:
            os << "not ";
            print_child(e.args[0], precedence(e.args[0]) < p, os);
            return;
        case K::Implies:
            print_child(e.args[0], precedence(e.args[0]) <= p, os);
            os << " => ";
            print_child(e.args[1], precedence(e.args[1]) < p, os);
            return;
        case K::Compare:
            print_child(e.args[0], precedence(e.args[0]) <= p, os);
            os << ' ' << op_text(e) << ' ';
            print_child(e.args[1], precedence(e.args[1]) <= p, os);
            return;
        case K::Iff:
        case K::Or:
        case K::Xor:
        case K::And:
        case K::Add:
        case K::Sub:
        case K::Mul:
            print_child(e.args[0], precedence(e.args[0]) < p, os);
            os << ' ' << op_text(e) << ' ';
            print_child(e.args[1], precedence(e.args[1]) <= p, os);
            return;
        case K::Min:
        case K::Max:
            os << (e.kind == K::Min ? "min(" : "max(");
            for (std::size_t i = 0; i < e.args.size(); ++i) {
                if (i)
                    os << ", ";
                print(e.args[i], os);
            }
            os << ')';
            return;
        case K::AllDifferent:
            os << "alldifferent(";
            print_refs(e.args, os);
            os << ')';
            return;
        case K::AtMost:
        case K::AtLeast:
        case K::Exactly:
            os << (e.kind == K::AtMost ? "atmost(" : e.kind == K::AtLeast ? "atleast(" : "exactly(") << e.n.text() << ", ";
            print_refs(e.args, os);
            os << ", " << e.m.text() << ')';
            return;
        case K::Choose:
            os << "choose(" << e.n.text() << ", " << e.m.text() << ", ";
            print_refs(e.args, os);
            os << ')';
            return;
        case K::Relation:
            os << "relation(";
            print_refs(e.args, os);
            os << ", [";
            for (std::size_t i = 0; i < e.tuples.size(); ++i) {
                os << (i ? ", (" : "(");
                for (std::size_t j = 0; j < e.tuples[i].size(); ++j)
                    os << (j ? ", " : "") << e.tuples[i][j].text();
                os << ')';
            }
            os << "])";
            return;
        }
    }

} // namespace detail

/// Parses model text. Never throws; syntax faults are reported with spans.
inline auto parse(std::string_view text) -> ParseResult { return detail::Parser(text).model(); }

/// Parses a single constraint expression (an optional leading "constraint" is accepted).
inline auto parse_expression(std::string_view text) -> ExprResult { return detail::Parser(text).expression(); }

inline auto to_text(const Expr & e) -> std::string
{
    std::ostringstream os;
    detail::print(e, os);
    return os.str();
}

inline auto serialize(const FeatureModel & m) -> std::string
{
    std::ostringstream os;
    os << "model " << m.name << '\n';
    for (const auto & e : m.enums) {
        os << "enum " << e.name << " { ";
        for (std::size_t i = 0; i < e.codes.size(); ++i)
            os << (i ? ", " : "") << e.codes[i];
        os << " }\n";
    }
    for (const auto & f : m.features) {
        os << "feature " << f.name;
        if (f.max_count != 1)
            os << " max " << f.max_count;
        if (f.parent)
            os << " of " << *f.parent << (f.edge == Edge::Mandatory ? " mandatory" : " optional");
        os << '\n';
        for (const auto & a : f.attributes) {
            os << "  attr " << a.name << " in ";
            if (a.domain.is_range)
                os << '[' << a.domain.lo << ".." << a.domain.hi << ']';
            else {
                os << '{';
                for (std::size_t i = 0; i < a.domain.values.size(); ++i)
                    os << (i ? ", " : "") << a.domain.values[i].text();
                os << '}';
            }
            os << '\n';
        }
    }
    for (const auto & g : m.groups) {
        os << "group of " << g.parent << " [" << g.min << ".." << g.max << "] { ";
        for (std::size_t i = 0; i < g.members.size(); ++i)
            os << (i ? ", " : "") << g.members[i];
        os << " }\n";
    }
    for (const auto & d : m.cross_deps) {
        os << d.from << (d.kind == CrossDep::Kind::Requires ? " requires " : " excludes ") << d.to;
        if (d.semantics == CrossDep::Semantics::PerInstance) {
            os << " per instance";
            if (d.offset != 0)
                os << " + " << d.offset;
        }
        os << '\n';
    }
    for (const auto & c : m.constraints)
        os << "constraint " << to_text(c) << '\n';
    for (const auto & g : m.goals)
        os << (g.direction == fd::Direction::Minimize ? "minimize" : "maximize") << " goal " << g.name << ": " << to_text(g.expr) << '\n';
    return os.str();
}

} // namespace featline::fm

#endif
