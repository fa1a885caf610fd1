#include "penergy/common.hpp"

#include <algorithm>
#include <cmath>

namespace penergy {

namespace {

// splitmix64, used only to derive deterministic sequence offsets from a seed
std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double frac(double x) { return x - std::floor(x); }

}  // namespace

QuasiRandom::QuasiRandom(int dim, std::uint64_t seed) : dim_(dim) {
    alpha_.resize(dim_);
    offset_.resize(dim_);
    // irrationals frac(sqrt(prime)) give a well-distributed Kronecker sequence
    static const int primes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31,
                                 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79};
    std::uint64_t state = seed;
    for (int d = 0; d < dim_; ++d) {
        int prime = primes[d % (sizeof(primes) / sizeof(primes[0]))];
        double root = std::sqrt(static_cast<double>(prime) * (1 + d / 22));
        alpha_[d] = frac(root);
        if (alpha_[d] < 1e-3) alpha_[d] += 0.37;
        state = mix64(state);
        offset_[d] = static_cast<double>(state >> 11) * 0x1.0p-53;
    }
}

std::vector<double> QuasiRandom::point(std::uint64_t k) const {
    std::vector<double> x(dim_);
    for (int d = 0; d < dim_; ++d)
        x[d] = frac(offset_[d] + static_cast<double>(k + 1) * alpha_[d]);
    return x;
}

double oscillation(const std::vector<double>& f) {
    auto [mn, mx] = std::minmax_element(f.begin(), f.end());
    return *mx - *mn;
}

bool project_to_oscillation_sphere(std::vector<double>& f) {
    const double osc = oscillation(f);
    if (!(osc > 1e-14)) return false;
    double mean = 0.0;
    for (double v : f) mean += v;
    mean /= static_cast<double>(f.size());
    for (double& v : f) v = (v - mean) / osc;
    return true;
}

std::vector<std::vector<double>> probe_functions(int n, int extra, std::uint64_t seed) {
    if (n < 2) throw DomainError("probe_functions: need at least 2 vertices");
    if (n > 16) throw GuardError("probe_functions: indicator enumeration guard (n > 16)");
    std::vector<std::vector<double>> probes;
    // nonconstant 0/1 indicators, enumerated by subset mask for determinism
    for (unsigned mask = 1; mask + 1 < (1u << n); ++mask) {
        std::vector<double> f(n, 0.0);
        for (int i = 0; i < n; ++i)
            if (mask & (1u << i)) f[i] = 1.0;
        project_to_oscillation_sphere(f);
        probes.push_back(std::move(f));
    }
    QuasiRandom qr(n, seed);
    std::uint64_t k = 0;
    int added = 0;
    while (added < extra) {
        std::vector<double> f = qr.point(k++);
        if (!project_to_oscillation_sphere(f)) continue;
        probes.push_back(std::move(f));
        ++added;
    }
    return probes;
}

}  // namespace penergy
