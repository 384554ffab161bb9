#include "cider/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "cider/rng.hpp"

namespace cider::stats {

std::string to_string(Smoothing s) { return s == Smoothing::AddOne ? "addone" : "raw"; }

Smoothing parse_smoothing(const std::string& s) {
    if (s == "addone") return Smoothing::AddOne;
    if (s == "raw") return Smoothing::Raw;
    throw std::invalid_argument("unknown smoothing mode '" + s + "' (expected 'addone' or 'raw')");
}

PValue pvalue_from_counts(std::size_t n_at_least, std::size_t n_draws, Smoothing smoothing) {
    if (n_draws == 0) throw std::invalid_argument("p-value needs at least one null draw");
    PValue p;
    p.n_draws = n_draws;
    p.smoothing = smoothing;
    if (smoothing == Smoothing::AddOne)
        p.value = static_cast<double>(n_at_least + 1) / static_cast<double>(n_draws + 1);
    else
        p.value = static_cast<double>(n_at_least) / static_cast<double>(n_draws);
    return p;
}

KernelSpec KernelSpec::gaussian_with_bandwidth(double bw) {
    if (!(bw > 0.0)) throw std::invalid_argument("kernel bandwidth must be positive");
    KernelSpec s;
    s.bandwidth = bw;
    return s;
}

double median_heuristic(std::span<const double> x) {
    const std::size_t n = x.size();
    if (n < 2) throw std::invalid_argument("median heuristic needs at least 2 points");
    std::vector<double> d;
    d.reserve(n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) d.push_back(std::abs(x[i] - x[j]));

    const std::size_t m = d.size();
    const std::size_t k = m / 2;
    std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
    double med = d[k];
    if (m % 2 == 0) {
        const double lower = *std::max_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k));
        med = 0.5 * (lower + med);
    }
    return med > 0.0 ? med : 1.0;
}

namespace {

// Row-major n x n Gram matrix.
std::vector<double> gram(std::span<const double> x, const KernelSpec& spec) {
    const std::size_t n = x.size();
    std::vector<double> k(n * n);
    if (spec.kind == KernelSpec::Kind::DeltaDiscrete) {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) k[i * n + j] = x[i] == x[j] ? 1.0 : 0.0;
        return k;
    }
    const double sigma = spec.bandwidth ? *spec.bandwidth : median_heuristic(x);
    const double inv = 1.0 / (2.0 * sigma * sigma);
    for (std::size_t i = 0; i < n; ++i) {
        k[i * n + i] = 1.0;
        for (std::size_t j = i + 1; j < n; ++j) {
            const double diff = x[i] - x[j];
            const double v = std::exp(-diff * diff * inv);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    return k;
}

// In-place double centering: K <- H K H.
void center(std::vector<double>& k, std::size_t n) {
    std::vector<double> row_mean(n, 0.0);
    double grand = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += k[i * n + j];
        row_mean[i] = s / static_cast<double>(n);
        grand += s;
    }
    grand /= static_cast<double>(n) * static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) k[i * n + j] -= row_mean[i] + row_mean[j] - grand;
}

double dot_all(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// Index lists of equal y-values, for the delta-kernel evaluation path.
std::vector<std::vector<std::uint32_t>> value_classes(std::span<const double> y) {
    std::vector<std::uint32_t> order(y.size());
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return y[a] < y[b]; });
    std::vector<std::vector<std::uint32_t>> classes;
    for (std::uint32_t idx : order) {
        if (classes.empty() || y[classes.back().front()] != y[idx]) classes.emplace_back();
        classes.back().push_back(idx);
    }
    return classes;
}

// (1/n^2) * sum over same-class pairs of the centered Gram; algebraically
// equal to the full elementwise product against the delta Gram of y. With
// exactly two classes the centered rows sum to zero, so both class blocks
// contribute the same amount and only the smaller one is summed.
double hsic_delta_path(const std::vector<double>& kc, std::size_t n,
                       const std::vector<std::vector<std::uint32_t>>& classes) {
    double acc = 0.0;
    if (classes.size() == 2) {
        const auto& members = classes[0].size() <= classes[1].size() ? classes[0] : classes[1];
        for (std::uint32_t i : members) {
            const double* row = kc.data() + static_cast<std::size_t>(i) * n;
            double s = 0.0;
            for (std::uint32_t j : members) s += row[j];
            acc += s;
        }
        acc *= 2.0;
    } else {
        for (const auto& members : classes) {
            for (std::uint32_t i : members) {
                const double* row = kc.data() + static_cast<std::size_t>(i) * n;
                double s = 0.0;
                for (std::uint32_t j : members) s += row[j];
                acc += s;
            }
        }
    }
    return acc / (static_cast<double>(n) * static_cast<double>(n));
}

void check_hsic_inputs(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("HSIC inputs must have equal length");
    if (x.size() < 3) throw std::invalid_argument("HSIC needs at least 3 samples");
}

}  // namespace

double hsic_statistic(std::span<const double> x, std::span<const double> y, const KernelSpec& kx,
                      const KernelSpec& ky) {
    check_hsic_inputs(x, y);
    const std::size_t n = x.size();
    std::vector<double> k = gram(x, kx);
    center(k, n);
    double stat;
    if (ky.kind == KernelSpec::Kind::DeltaDiscrete) {
        stat = hsic_delta_path(k, n, value_classes(y));
    } else {
        const std::vector<double> l = gram(y, ky);
        stat = dot_all(k, l) / (static_cast<double>(n) * static_cast<double>(n));
    }
    return stat > 0.0 ? stat : 0.0;
}

PValue hsic_perm_test(std::span<const double> x, std::span<const double> y, const KernelSpec& kx,
                      const KernelSpec& ky, std::size_t n_perm, std::uint64_t seed,
                      Smoothing smoothing) {
    check_hsic_inputs(x, y);
    if (n_perm < 1) throw std::invalid_argument("permutation count must be at least 1");
    const std::size_t n = x.size();
    const double n2 = static_cast<double>(n) * static_cast<double>(n);

    // Bandwidths are resolved once from the unpermuted data and frozen.
    KernelSpec kx_fixed = kx;
    if (kx.kind == KernelSpec::Kind::GaussianMedianHeuristic && !kx.bandwidth)
        kx_fixed.bandwidth = median_heuristic(x);
    KernelSpec ky_fixed = ky;
    if (ky.kind == KernelSpec::Kind::GaussianMedianHeuristic && !ky.bandwidth)
        ky_fixed.bandwidth = median_heuristic(y);

    std::vector<double> kc = gram(x, kx_fixed);
    center(kc, n);

    const RngStream base(seed);
    std::size_t at_least = 0;

    if (ky_fixed.kind == KernelSpec::Kind::DeltaDiscrete) {
        const auto classes = value_classes(y);
        const double observed = std::max(0.0, hsic_delta_path(kc, n, classes));
        std::vector<std::uint32_t> inverse(n);
        std::vector<std::vector<std::uint32_t>> permuted(classes.size());
        for (std::size_t i = 0; i < n_perm; ++i) {
            RngStream rng = base.child("perm", i);
            const auto pi = rng.permutation(static_cast<std::uint32_t>(n));
            for (std::uint32_t j = 0; j < n; ++j) inverse[pi[j]] = j;
            for (std::size_t c = 0; c < classes.size(); ++c) {
                permuted[c].resize(classes[c].size());
                for (std::size_t m = 0; m < classes[c].size(); ++m)
                    permuted[c][m] = inverse[classes[c][m]];
            }
            if (std::max(0.0, hsic_delta_path(kc, n, permuted)) >= observed) ++at_least;
        }
        return pvalue_from_counts(at_least, n_perm, smoothing);
    }

    const std::vector<double> l = gram(y, ky_fixed);
    const double observed = std::max(0.0, dot_all(kc, l) / n2);
    for (std::size_t i = 0; i < n_perm; ++i) {
        RngStream rng = base.child("perm", i);
        const auto pi = rng.permutation(static_cast<std::uint32_t>(n));
        double acc = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            const double* krow = kc.data() + r * n;
            const double* lrow = l.data() + static_cast<std::size_t>(pi[r]) * n;
            for (std::size_t c = 0; c < n; ++c) acc += krow[c] * lrow[pi[c]];
        }
        if (std::max(0.0, acc / n2) >= observed) ++at_least;
    }
    return pvalue_from_counts(at_least, n_perm, smoothing);
}

double ks_statistic_uniform(std::span<const double> p) {
    if (p.empty()) throw std::invalid_argument("KS statistic needs at least one value");
    std::vector<double> u(p.begin(), p.end());
    for (double v : u)
        if (!(v >= 0.0 && v <= 1.0))
            throw std::invalid_argument("KS input values must lie in [0,1]");
    std::sort(u.begin(), u.end());
    const double n = static_cast<double>(u.size());
    double d = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double hi = static_cast<double>(i + 1) / n - u[i];
        const double lo = u[i] - static_cast<double>(i) / n;
        d = std::max(d, std::max(hi, lo));
    }
    return d;
}

PValue ks_uniformity_test(std::span<const double> p, std::size_t n_mc, std::uint64_t seed) {
    if (n_mc < 1) throw std::invalid_argument("Monte-Carlo count must be at least 1");
    const double observed = ks_statistic_uniform(p);
    const std::size_t len = p.size();
    const double n = static_cast<double>(len);
    const RngStream base(seed);
    std::vector<double> u(len);
    std::size_t at_least = 0;
    for (std::size_t i = 0; i < n_mc; ++i) {
        RngStream rng = base.child("mc", i);
        for (auto& v : u) v = rng.next_unit();
        std::sort(u.begin(), u.end());
        double d = 0.0;
        for (std::size_t j = 0; j < len; ++j) {
            const double hi = static_cast<double>(j + 1) / n - u[j];
            const double lo = u[j] - static_cast<double>(j) / n;
            d = std::max(d, std::max(hi, lo));
        }
        if (d >= observed) ++at_least;
    }
    return pvalue_from_counts(at_least, n_mc, Smoothing::AddOne);
}

namespace {

struct SignedRanks {
    std::vector<double> ranks;  // mid-ranks of |diff|, zero differences dropped
    std::vector<bool> positive;
};

SignedRanks signed_ranks(std::span<const double> values, double mu0) {
    if (values.size() < 6)
        throw std::invalid_argument("signed-rank test needs at least 6 values");
    std::vector<double> diffs;
    diffs.reserve(values.size());
    for (double v : values) {
        const double d = v - mu0;
        if (d != 0.0) diffs.push_back(d);
    }
    if (diffs.empty())
        throw std::invalid_argument("signed-rank test degenerate: all values equal mu0");

    std::vector<std::size_t> order(diffs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::abs(diffs[a]) < std::abs(diffs[b]);
    });

    SignedRanks out;
    out.ranks.resize(diffs.size());
    out.positive.resize(diffs.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() &&
               std::abs(diffs[order[j + 1]]) == std::abs(diffs[order[i]]))
            ++j;
        const double mid = 0.5 * static_cast<double>((i + 1) + (j + 1));
        for (std::size_t k = i; k <= j; ++k) out.ranks[order[k]] = mid;
        i = j + 1;
    }
    for (std::size_t k = 0; k < diffs.size(); ++k) out.positive[k] = diffs[k] > 0.0;
    return out;
}

}  // namespace

WilcoxonStats wilcoxon_stats(std::span<const double> values, double mu0) {
    const auto sr = signed_ranks(values, mu0);
    WilcoxonStats st;
    st.n_used = sr.ranks.size();
    for (std::size_t k = 0; k < sr.ranks.size(); ++k)
        if (sr.positive[k]) st.w_plus += sr.ranks[k];
    const double n = static_cast<double>(st.n_used);
    const double mean = n * (n + 1.0) / 4.0;
    const double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0;
    st.z = (st.w_plus - mean) / std::sqrt(var);
    return st;
}

PValue wilcoxon_signed_rank(std::span<const double> values, double mu0) {
    const WilcoxonStats st = wilcoxon_stats(values, mu0);
    PValue p;
    p.value = std::erfc(std::abs(st.z) / std::sqrt(2.0));
    p.n_draws = 0;
    p.smoothing = Smoothing::Raw;
    return p;
}

PValue wilcoxon_signed_rank_exact(std::span<const double> values, double mu0) {
    const auto sr = signed_ranks(values, mu0);
    const std::size_t n = sr.ranks.size();
    if (n > 25) throw std::invalid_argument("exact signed-rank mode supports n <= 25");

    // Ranks doubled so mid-ranks become integers; DP over the sum of
    // positively-signed ranks across all 2^n sign assignments.
    std::vector<long long> r2(n);
    long long total = 0;
    for (std::size_t k = 0; k < n; ++k) {
        r2[k] = static_cast<long long>(std::llround(2.0 * sr.ranks[k]));
        total += r2[k];
    }
    std::vector<double> count(static_cast<std::size_t>(total) + 1, 0.0);
    count[0] = 1.0;
    long long reached = 0;
    for (std::size_t k = 0; k < n; ++k) {
        reached += r2[k];
        for (long long s = reached; s >= r2[k]; --s)
            count[static_cast<std::size_t>(s)] += count[static_cast<std::size_t>(s - r2[k])];
    }
    double w2 = 0.0;
    for (std::size_t k = 0; k < n; ++k)
        if (sr.positive[k]) w2 += 2.0 * sr.ranks[k];
    const long long w = static_cast<long long>(std::llround(w2));

    const double denom = std::pow(2.0, static_cast<double>(n));
    double lower = 0.0, upper = 0.0;
    for (long long s = 0; s <= total; ++s) {
        if (s <= w) lower += count[static_cast<std::size_t>(s)];
        if (s >= w) upper += count[static_cast<std::size_t>(s)];
    }
    PValue p;
    p.value = std::min(1.0, 2.0 * std::min(lower, upper) / denom);
    p.n_draws = 0;
    p.smoothing = Smoothing::Raw;
    return p;
}

}  // namespace cider::stats
