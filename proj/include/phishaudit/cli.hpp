#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace phishaudit {

// Command-line entry point. args excludes the program name. Returns 0 on
// success, 1 on usage or validation errors, 2 on runtime failures.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace phishaudit
