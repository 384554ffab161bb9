#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>

namespace cider::stats {

// Add-one counts the observed statistic among the draws, bounding the p-value
// below by 1/(N+1); raw mode reproduces literal-zero permutation p-values.
enum class Smoothing { AddOne, Raw };

std::string to_string(Smoothing s);
Smoothing parse_smoothing(const std::string& s);

struct PValue {
    double value = 1.0;
    std::size_t n_draws = 0;  // permutation / Monte-Carlo count; 0 = analytic
    Smoothing smoothing = Smoothing::AddOne;
};

// Builds a p-value from the number of null draws at least as extreme as the
// observed statistic.
PValue pvalue_from_counts(std::size_t n_at_least, std::size_t n_draws, Smoothing smoothing);

struct KernelSpec {
    enum class Kind { GaussianMedianHeuristic, DeltaDiscrete };

    Kind kind = Kind::GaussianMedianHeuristic;
    // Fixed bandwidth override for the Gaussian kernel; must be > 0.
    std::optional<double> bandwidth;

    static KernelSpec gaussian() { return {}; }
    static KernelSpec gaussian_with_bandwidth(double bw);
    static KernelSpec delta() { return {Kind::DeltaDiscrete, std::nullopt}; }
};

// Median of pairwise Euclidean distances over distinct index pairs.
// Falls back to 1.0 for constant input (median distance 0).
double median_heuristic(std::span<const double> x);

// Biased V-statistic estimator (1/n^2) * trace(K H L H) with H the centering
// operator. Nonnegative; zero whenever either input is constant.
double hsic_statistic(std::span<const double> x, std::span<const double> y, const KernelSpec& kx,
                      const KernelSpec& ky);

// Permutation test of independence: y is permuted, the statistic recomputed
// with kernels and bandwidths frozen from the unpermuted data. Permutation i
// always draws from the stream (seed, i), so the result is independent of
// scheduling.
PValue hsic_perm_test(std::span<const double> x, std::span<const double> y, const KernelSpec& kx,
                      const KernelSpec& ky, std::size_t n_perm, std::uint64_t seed,
                      Smoothing smoothing = Smoothing::AddOne);

// Two-sided sup-distance between the empirical CDF of p and Uniform[0,1],
// evaluated at the jump points. All values must lie in [0,1].
double ks_statistic_uniform(std::span<const double> p);

// Monte-Carlo null: n_mc synthetic samples of the same length drawn from
// Uniform[0,1]; add-one fraction of null statistics >= observed.
PValue ks_uniformity_test(std::span<const double> p, std::size_t n_mc, std::uint64_t seed);

struct WilcoxonStats {
    double w_plus = 0.0;   // positive-rank sum after dropping zero differences
    double z = 0.0;        // normal approximation, no continuity correction
    std::size_t n_used = 0;
};

WilcoxonStats wilcoxon_stats(std::span<const double> values, double mu0);

// Two-sided signed-rank test against location mu0 via the normal
// approximation: zero differences dropped, ties mid-ranked. Requires at
// least 6 values, not all equal to mu0.
PValue wilcoxon_signed_rank(std::span<const double> values, double mu0);

// Exact null distribution by sign enumeration; only for n <= 25 after
// dropping zero differences.
PValue wilcoxon_signed_rank_exact(std::span<const double> values, double mu0);

}  // namespace cider::stats
