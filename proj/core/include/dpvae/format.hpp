#pragma once

#include <string>
#include <string_view>

namespace dpvae {

/// Shortest-round-trip-safe decimal text (17 significant digits).
std::string format_double(double v);
/// Exact inverse of format_double; throws LoadError on malformed text.
double parse_double(std::string_view text);

}  // namespace dpvae
