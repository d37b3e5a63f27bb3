#pragma once

#include <ostream>

namespace cobra::cli {

/// Runs the command line.  Returns 0 on success, 1 on user error, 2 on a broken internal invariant.
int main(int argc, const char *const *argv, std::ostream &out, std::ostream &err);

}
