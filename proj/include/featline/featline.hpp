#ifndef FEATLINE_FEATLINE_HPP
#define FEATLINE_FEATLINE_HPP

#include <featline/analyses.hpp>
#include <featline/fd/search.hpp>
#include <featline/fm/compile.hpp>
#include <featline/fm/parser.hpp>
#include <featline/service.hpp>
#include <featline/session.hpp>

#endif
