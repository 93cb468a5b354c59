#pragma once

#include <string>
#include <vector>

namespace mmscope {

// Runs one subcommand. Returns 0 on success, 1 on usage errors, 2 on
// data errors.
int dispatch(const std::vector<std::string>& argv);

}  // namespace mmscope
