#pragma once

#include "cobra/ast.hpp"

#include <string>

namespace cobra {

/// Parses CobraLang source and checks that every variable is defined before use.
/// Throws SyntaxError with the offending position.
ast::Program parse(const std::string &source);

/// Reads a whole file; throws Error("<path>: no such file") when it cannot be opened.
std::string read_file(const std::string &path);

}
