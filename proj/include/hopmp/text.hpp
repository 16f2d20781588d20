#pragma once

// Small text helpers shared by the serializers and the spec reader.

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hopmp {

/// Shortest representation that reads back to the same double.
std::string format_double(double v);
std::string join_doubles(std::span<const double> values, std::string_view sep);

std::string_view trim(std::string_view s);
/// Splits on sep and trims each field; an empty input yields one empty field.
std::vector<std::string_view> split(std::string_view s, char sep);

/// Whole-string parse; throws hopmp::Error on trailing garbage.
double parse_double(std::string_view s);

}  // namespace hopmp
