#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace penergy {

// Exit-code contract used by the CLI: 2 input, 3 solver, 4 guard.
class DomainError : public std::runtime_error {
public:
    explicit DomainError(const std::string& msg) : std::runtime_error(msg) {}
};

class StructureError : public std::runtime_error {
public:
    explicit StructureError(const std::string& msg) : std::runtime_error(msg) {}
};

class GuardError : public std::runtime_error {
public:
    explicit GuardError(const std::string& msg) : std::runtime_error(msg) {}
};

class SolverError : public std::runtime_error {
public:
    SolverError(const std::string& msg, double residual)
        : std::runtime_error(msg), residual_(residual) {}
    double residual() const { return residual_; }

private:
    double residual_ = std::numeric_limits<double>::quiet_NaN();
};

class DegeneracyError : public std::runtime_error {
public:
    explicit DegeneracyError(const std::string& msg) : std::runtime_error(msg) {}
};

inline constexpr double kResistanceCutoff = 1e15;  // beyond this a resistance is reported as +inf
inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Kronecker (additive Weyl) low-discrepancy sequence in [0,1)^dim.
// Deterministic for a given (dim, seed); the seed only shifts the origin.
class QuasiRandom {
public:
    QuasiRandom(int dim, std::uint64_t seed);

    // k-th point of the sequence (k >= 0).
    std::vector<double> point(std::uint64_t k) const;

    int dim() const { return dim_; }

private:
    int dim_;
    std::vector<double> alpha_;
    std::vector<double> offset_;
};

// Probe functions on an n-point set: all nonconstant 0/1 indicators followed by
// `extra` quasi-random samples projected onto M = {Osc(f) = 1, sum f = 0}.
// Indicators are normalized onto M as well; the ordering is deterministic.
std::vector<std::vector<double>> probe_functions(int n, int extra, std::uint64_t seed);

// Projects an arbitrary vector onto M = {Osc = 1, sum = 0}; returns false for
// (numerically) constant input.
bool project_to_oscillation_sphere(std::vector<double>& f);

double oscillation(const std::vector<double>& f);

}  // namespace penergy
