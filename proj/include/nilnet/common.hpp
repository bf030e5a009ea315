#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace nilnet {

using Vec = std::vector<double>;

// Input/shape/schema problems: the caller handed us something malformed.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// The computation itself failed: no admissible parameter, non-convergence,
// loss of a structural property that the algorithm relies on.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

std::string format_double(double v);       // 17 significant digits, locale-free
std::uint64_t fnv1a64(const void* data, std::size_t len);
std::uint64_t fnv1a64(const std::string& s);

}  // namespace nilnet
