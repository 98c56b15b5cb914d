#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

namespace rpost::cli {

/// Exit codes: 0 success, 1 usage/I-O/parse/domain error, 2 the computation finished
/// but its result is not acceptable (non-convergence, failed --check).
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// 64-bit FNV-1a digest.
std::uint64_t fnv1a64(const std::string& text);

/// Environment variable that replaces the output directory.
inline constexpr const char* kOutputDirEnv = "RPOST_OUTPUT_DIR";

}  // namespace rpost::cli
