#pragma once

#include <ostream>

namespace stfe {

/// Entry point of the stfe command line tool.
///
///   stfe simulate | ensemble | converge | selftest [options]
///
/// Returns 0 when every check passes, 1 when a check fails or a run breaks
/// down numerically, and 2 on usage errors (bad flags, unreadable or invalid
/// config).
int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace stfe
