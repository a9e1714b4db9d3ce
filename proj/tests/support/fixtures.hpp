#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

inline auto fixture_path(const std::string & name) -> std::string { return std::string(FEATLINE_FIXTURE_DIR) + "/" + name; }

inline auto read_fixture(const std::string & name) -> std::string
{
    std::ifstream in(fixture_path(name));
    if (! in)
        throw std::runtime_error("missing fixture " + name);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}
