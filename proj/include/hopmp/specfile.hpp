#pragma once

// Plain-text problem files: bracketed sections holding `key = value` lines,
// '#' comments. See README.md for the grammar.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "hopmp/control.hpp"
#include "hopmp/forward.hpp"
#include "hopmp/jets.hpp"
#include "hopmp/problem.hpp"

namespace hopmp {

struct Numerics {
    ForwardOptions forward;
    /// Residual tolerance used by verify and improve.
    double pmp_tolerance = 1e-4;
    TerminalConvention convention = TerminalConvention::Derived;
};

struct SpecFile {
    Problem problem;
    ControlCurve control0;
    Numerics numerics;
    /// "section.key = value" for every setting that fell back to its default.
    std::vector<std::string> defaults;
};

/// Throws SpecSyntaxError for malformed text (including expressions that do
/// not parse) and ValidationFailed when the assembled problem is invalid.
/// Relative `file:` control descriptors resolve against `base`.
SpecFile parse_spec_text(std::string_view text, const std::filesystem::path& base = {});
SpecFile parse_spec(const std::filesystem::path& path);

TerminalConvention parse_convention(std::string_view name);

}  // namespace hopmp
