#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

// ensim: field-theory tenet checks and ensemble-density solvers on small
// Cartesian lattices. Conventions used throughout:
//   * metric signature (+,-,-,-), natural units c = 1
//   * hbar is always an explicit parameter, never silently 1
//   * Heaviside-Lorentz units (Coulomb potential q/(4 pi r))
//   * Levi-Civita eps^{0123} = +1

namespace ensim {

using Real = double;
using Complex = std::complex<double>;

inline constexpr const char* kVersion = "0.3.0";

struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& what) : Error(what) {}
};

struct StencilError : Error {
    explicit StencilError(const std::string& what) : Error(what) {}
};

struct SolverError : Error {
    explicit SolverError(const std::string& what) : Error(what) {}
};

#define ENSIM_REQUIRE(cond, msg)                                               \
    do {                                                                       \
        if (!(cond)) throw ::ensim::Error(std::string("requirement failed: ") + (msg)); \
    } while (0)

#define ENSIM_CONFIG_REQUIRE(cond, msg)                                        \
    do {                                                                       \
        if (!(cond)) throw ::ensim::ConfigError(msg);                          \
    } while (0)

inline Real sqr(Real x) { return x * x; }

}  // namespace ensim
