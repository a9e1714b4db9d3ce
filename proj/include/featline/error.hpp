#ifndef FEATLINE_ERROR_HPP
#define FEATLINE_ERROR_HPP

#include <stdexcept>
#include <string>

namespace featline {

/// Base class of every error raised by the library. `code()` is a stable
/// machine token (used verbatim in JSON error bodies).
class Error : public std::runtime_error
{
public:
    Error(std::string code, const std::string & message) :
        std::runtime_error(message),
        _code(std::move(code))
    {
    }

    auto code() const -> const std::string & { return _code; }

private:
    std::string _code;
};

#define FEATLINE_DEFINE_ERROR(Name, token)                                  \
    class Name : public Error                                               \
    {                                                                       \
    public:                                                                 \
        explicit Name(const std::string & message) : Error(token, message) \
        {                                                                   \
        }                                                                   \
    }

FEATLINE_DEFINE_ERROR(EmptyDomain, "empty_domain");
FEATLINE_DEFINE_ERROR(ArityMismatch, "arity_mismatch");
FEATLINE_DEFINE_ERROR(IntegerOverflow, "integer_overflow");
FEATLINE_DEFINE_ERROR(NotReifiable, "not_reifiable");
FEATLINE_DEFINE_ERROR(UnknownLevel, "unknown_level");
FEATLINE_DEFINE_ERROR(InvalidArgument, "invalid_argument");
FEATLINE_DEFINE_ERROR(Unsatisfiable, "unsatisfiable");
FEATLINE_DEFINE_ERROR(TypeError, "type_error");
FEATLINE_DEFINE_ERROR(CompileError, "compile_error");
FEATLINE_DEFINE_ERROR(VoidModel, "void_model");
FEATLINE_DEFINE_ERROR(UnknownGoal, "unknown_goal");
FEATLINE_DEFINE_ERROR(UnknownName, "unknown_name");
FEATLINE_DEFINE_ERROR(OutOfRange, "out_of_range");
FEATLINE_DEFINE_ERROR(ParseError, "parse_error");

#undef FEATLINE_DEFINE_ERROR

} // namespace featline

#endif
