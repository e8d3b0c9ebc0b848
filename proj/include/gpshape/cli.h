#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "gpshape/error.h"

namespace gpshape::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUser = 1;
inline constexpr int kExitInternal = 2;

// E_IO, E_CONFIG, E_PARSE, E_DATA, E_INTERRUPTED or E_INTERNAL.
std::string_view error_category(ErrorCode code);

// Parses arguments (argv[0] is the program name), runs the subcommand and
// returns the process exit code. Errors are reported as one JSON line on stderr.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);

// Value in user units converted to normalized model units: millimeters map
// through the template scale, or through a given model diameter which is
// taken to span the normalized unit ball (diameter 2).
double to_model_units(double value, std::string_view units, double template_scale, double model_diameter_mm);

}  // namespace gpshape::cli
