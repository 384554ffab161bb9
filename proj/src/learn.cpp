#include "cider/learn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "cider/rng.hpp"

namespace cider::learn {

std::size_t ForestConfig::resolve_mtry(std::size_t d) const {
    if (d == 0) throw std::invalid_argument("forest needs at least one feature");
    if (mtry == 0) {
        const auto m = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(d))));
        return std::max<std::size_t>(1, m);
    }
    if (mtry > d) throw std::invalid_argument("mtry exceeds the number of features");
    return mtry;
}

const std::array<std::uint32_t, 2>& Tree::leaf_counts(const double* row) const {
    std::int32_t at = 0;
    while (nodes[static_cast<std::size_t>(at)].feature >= 0) {
        const TreeNode& nd = nodes[static_cast<std::size_t>(at)];
        at = row[nd.feature] <= nd.threshold ? nd.left : nd.right;
    }
    return nodes[static_cast<std::size_t>(at)].counts;
}

namespace {

struct Builder {
    const synth::Dataset& data;
    std::size_t mtry;
    std::size_t min_leaf;
    RngStream& rng;
    Tree& tree;
    std::vector<std::size_t> feature_pool;
    std::vector<std::uint32_t> scratch;

    std::int32_t build(std::vector<std::uint32_t>& idx) {
        std::array<std::uint32_t, 2> counts{{0, 0}};
        for (std::uint32_t i : idx) ++counts[data.condition[i]];

        const std::int32_t self = static_cast<std::int32_t>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes.back().counts = counts;

        if (counts[0] == 0 || counts[1] == 0 || idx.size() < 2 * min_leaf) return self;

        // mtry distinct features, tried in ascending index order so score
        // ties resolve toward the lowest feature.
        const std::size_t d = data.cols();
        feature_pool.resize(d);
        std::iota(feature_pool.begin(), feature_pool.end(), std::size_t{0});
        for (std::size_t i = 0; i < mtry; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(rng.next_below(d - i));
            std::swap(feature_pool[i], feature_pool[j]);
        }
        std::sort(feature_pool.begin(), feature_pool.begin() + static_cast<std::ptrdiff_t>(mtry));

        const double m = static_cast<double>(idx.size());
        double best_score = std::numeric_limits<double>::infinity();
        std::size_t best_feature = 0;
        double best_threshold = 0.0;
        bool found = false;

        for (std::size_t fi = 0; fi < mtry; ++fi) {
            const std::size_t f = feature_pool[fi];
            scratch = idx;
            std::sort(scratch.begin(), scratch.end(), [&](std::uint32_t a, std::uint32_t b) {
                return data.at(a, f) < data.at(b, f);
            });
            std::uint32_t l0 = 0, l1 = 0;
            for (std::size_t k = 1; k < scratch.size(); ++k) {
                const std::uint8_t cls = data.condition[scratch[k - 1]];
                (cls ? l1 : l0) += 1;
                const double lo = data.at(scratch[k - 1], f);
                const double hi = data.at(scratch[k], f);
                if (lo == hi) continue;  // splits only between distinct values
                if (k < min_leaf || scratch.size() - k < min_leaf) continue;
                const double nl = static_cast<double>(k);
                const double nr = m - nl;
                const double r0 = static_cast<double>(counts[0] - l0);
                const double r1 = static_cast<double>(counts[1] - l1);
                const double gl = 1.0 - (l0 * static_cast<double>(l0) + l1 * static_cast<double>(l1)) / (nl * nl);
                const double gr = 1.0 - (r0 * r0 + r1 * r1) / (nr * nr);
                const double score = (nl * gl + nr * gr) / m;
                if (score < best_score) {
                    best_score = score;
                    best_feature = f;
                    best_threshold = 0.5 * (lo + hi);
                    found = true;
                }
            }
        }
        if (!found) return self;  // drawn features constant within the node

        std::vector<std::uint32_t> left, right;
        left.reserve(idx.size());
        right.reserve(idx.size());
        for (std::uint32_t i : idx)
            (data.at(i, best_feature) <= best_threshold ? left : right).push_back(i);
        idx.clear();
        idx.shrink_to_fit();

        const std::int32_t left_id = build(left);
        const std::int32_t right_id = build(right);
        TreeNode& nd = tree.nodes[static_cast<std::size_t>(self)];
        nd.feature = static_cast<std::int32_t>(best_feature);
        nd.threshold = best_threshold;
        nd.left = left_id;
        nd.right = right_id;
        return self;
    }
};

std::uint8_t smaller_label_class(const std::array<std::string, 2>& labels) {
    return labels[0] <= labels[1] ? 0 : 1;
}

}  // namespace

Forest fit_forest(const synth::Dataset& data, const ForestConfig& config, std::uint64_t seed) {
    data.validate();
    if (config.n_trees < 1) throw std::invalid_argument("forest needs at least one tree");
    const std::size_t n = data.rows();
    const std::size_t mtry = config.resolve_mtry(data.cols());

    Forest forest;
    forest.class_labels = data.class_labels;
    forest.n_features = data.cols();
    forest.seed = seed;
    forest.config = config;
    forest.trees.resize(config.n_trees);

    const RngStream base(seed);
    for (std::size_t t = 0; t < config.n_trees; ++t) {
        RngStream rng = base.child("tree", t);
        std::vector<std::uint32_t> bag(n);
        for (auto& b : bag) b = static_cast<std::uint32_t>(rng.next_below(n));
        {
            std::vector<std::uint32_t> uniq = bag;
            std::sort(uniq.begin(), uniq.end());
            uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
            forest.trees[t].bag_unique = static_cast<std::uint32_t>(uniq.size());
        }
        Builder builder{data, mtry, std::max<std::size_t>(1, config.min_leaf), rng,
                        forest.trees[t], {}, {}};
        builder.build(bag);
    }
    return forest;
}

std::uint8_t Forest::predict_class(const double* row) const {
    const std::uint8_t tie = smaller_label_class(class_labels);
    std::size_t votes0 = 0, votes1 = 0;
    for (const Tree& t : trees) {
        const auto& counts = t.leaf_counts(row);
        if (counts[0] == counts[1])
            (tie == 0 ? votes0 : votes1) += 1;
        else
            (counts[0] > counts[1] ? votes0 : votes1) += 1;
    }
    if (votes0 == votes1) return tie;
    return votes0 > votes1 ? 0 : 1;
}

std::string predict(const Forest& forest, std::span<const double> row) {
    if (row.size() != forest.n_features)
        throw std::invalid_argument("feature row length does not match the forest");
    return forest.class_labels[forest.predict_class(row.data())];
}

CvModels fit_cv_models(const synth::Dataset& data, const ForestConfig& config, std::uint64_t seed) {
    data.validate();
    const std::size_t n = data.rows();
    if (n < 4) throw std::invalid_argument("cross-validation needs at least 4 trials");

    CvModels cv;
    cv.fold_of.resize(n);
    const std::size_t n_folds =
        config.cv == ForestConfig::Cv::LeaveOneOut ? n : std::min(config.k_folds, n);
    if (n_folds < 2) throw std::invalid_argument("cross-validation needs at least 2 folds");
    for (std::size_t i = 0; i < n; ++i)
        cv.fold_of[i] = static_cast<std::int32_t>(
            config.cv == ForestConfig::Cv::LeaveOneOut ? i : i % n_folds);

    cv.fold_forests.resize(n_folds);
    cv.fold_trained.assign(n_folds, 0);
    const RngStream base(seed);

    for (std::size_t f = 0; f < n_folds; ++f) {
        synth::Dataset train;
        train.class_labels = data.class_labels;
        train.feature_names = data.feature_names;
        for (std::size_t i = 0; i < n; ++i) {
            if (cv.fold_of[i] == static_cast<std::int32_t>(f)) continue;
            train.condition.push_back(data.condition[i]);
            for (std::size_t c = 0; c < data.cols(); ++c) train.features.push_back(data.at(i, c));
        }
        const bool both = std::find(train.condition.begin(), train.condition.end(), 0) !=
                              train.condition.end() &&
                          std::find(train.condition.begin(), train.condition.end(), 1) !=
                              train.condition.end();
        if (!both) {
            ++cv.skipped_folds;
            continue;
        }
        cv.fold_forests[f] = fit_forest(train, config, base.child("fold", f).key());
        cv.fold_trained[f] = 1;
    }

    cv.held_out_prediction.resize(n);
    std::size_t correct = 0;
    std::vector<double> row(data.cols());
    for (std::size_t i = 0; i < n; ++i) {
        const auto f = static_cast<std::size_t>(cv.fold_of[i]);
        if (!cv.fold_trained[f]) {
            // skipped fold: counted as an error
            cv.held_out_prediction[i] = data.condition[i] ? 0 : 1;
            continue;
        }
        for (std::size_t c = 0; c < data.cols(); ++c) row[c] = data.at(i, c);
        cv.held_out_prediction[i] = cv.fold_forests[f].predict_class(row.data());
        if (cv.held_out_prediction[i] == data.condition[i]) ++correct;
    }
    cv.pe_star = 100.0 * static_cast<double>(correct) / static_cast<double>(n);
    return cv;
}

double loo_accuracy(const synth::Dataset& data, const ForestConfig& config, std::uint64_t seed) {
    return fit_cv_models(data, config, seed).pe_star;
}

namespace {

// Leaf vote of one tree plus the set of features its decision path tested,
// cached per (trial, tree): permuting a feature can only change the votes of
// trees whose path for that trial touched it.
struct CachedVote {
    std::uint8_t vote = 0;
    std::uint64_t touched = 0;
};

std::uint8_t tree_vote(const Tree& t, const double* row, std::uint8_t tie_class,
                       std::uint64_t* touched) {
    std::int32_t at = 0;
    std::uint64_t mask = 0;
    while (t.nodes[static_cast<std::size_t>(at)].feature >= 0) {
        const TreeNode& nd = t.nodes[static_cast<std::size_t>(at)];
        // features beyond 62 share the top bit; only ever over-approximates
        mask |= std::uint64_t{1} << std::min<std::int32_t>(nd.feature, 63);
        at = row[nd.feature] <= nd.threshold ? nd.left : nd.right;
    }
    if (touched) *touched = mask;
    const auto& counts = t.nodes[static_cast<std::size_t>(at)].counts;
    if (counts[0] == counts[1]) return tie_class;
    return counts[0] > counts[1] ? 0 : 1;
}

}  // namespace

ImportanceResult permutation_importance(const synth::Dataset& data, const ForestConfig& config,
                                        std::size_t n_perm, std::uint64_t seed,
                                        stats::Smoothing smoothing) {
    if (n_perm < 1) throw std::invalid_argument("permutation count must be at least 1");
    const CvModels cv = fit_cv_models(data, config, seed);
    const std::size_t n = data.rows();
    const std::size_t d = data.cols();
    const std::uint8_t tie_class = smaller_label_class(data.class_labels);

    ImportanceResult out;
    out.pe_star = cv.pe_star;
    out.skipped_folds = cv.skipped_folds;
    out.p_values.resize(d);

    // Unpermuted per-tree votes and per-path feature sets.
    std::vector<std::vector<CachedVote>> cache(n);
    std::vector<double> row(d);
    for (std::size_t i = 0; i < n; ++i) {
        const auto f = static_cast<std::size_t>(cv.fold_of[i]);
        if (!cv.fold_trained[f]) continue;
        const Forest& forest = cv.fold_forests[f];
        cache[i].resize(forest.trees.size());
        for (std::size_t c = 0; c < d; ++c) row[c] = data.at(i, c);
        for (std::size_t t = 0; t < forest.trees.size(); ++t)
            cache[i][t].vote = tree_vote(forest.trees[t], row.data(), tie_class,
                                         &cache[i][t].touched);
    }

    const RngStream base(seed);
    for (std::size_t j = 0; j < d; ++j) {
        // Votes of trees whose paths never test feature j are fixed.
        std::vector<std::uint32_t> base_votes0(n, 0);
        std::vector<std::vector<std::uint32_t>> affected(n);
        for (std::size_t i = 0; i < n; ++i) {
            const std::uint64_t bit = std::uint64_t{1} << std::min<std::size_t>(j, 63);
            for (std::size_t t = 0; t < cache[i].size(); ++t) {
                if (cache[i][t].touched & bit)
                    affected[i].push_back(static_cast<std::uint32_t>(t));
                else if (cache[i][t].vote == 0)
                    ++base_votes0[i];
            }
        }

        const RngStream feature_stream = base.child("importance", j);
        std::size_t at_least = 0;
        for (std::size_t k = 0; k < n_perm; ++k) {
            RngStream rng = feature_stream.child("perm", k);
            const auto pi = rng.permutation(static_cast<std::uint32_t>(n));
            std::size_t correct = 0;
            for (std::size_t i = 0; i < n; ++i) {
                const auto f = static_cast<std::size_t>(cv.fold_of[i]);
                if (!cv.fold_trained[f]) continue;  // counted as an error, as in PE*
                const Forest& forest = cv.fold_forests[f];
                std::size_t votes0 = base_votes0[i];
                if (!affected[i].empty()) {
                    for (std::size_t c = 0; c < d; ++c) row[c] = data.at(i, c);
                    row[j] = data.at(pi[i], j);
                    for (std::uint32_t t : affected[i])
                        if (tree_vote(forest.trees[t], row.data(), tie_class, nullptr) == 0)
                            ++votes0;
                }
                const std::size_t votes1 = forest.trees.size() - votes0;
                std::uint8_t pred;
                if (votes0 == votes1)
                    pred = tie_class;
                else
                    pred = votes0 > votes1 ? 0 : 1;
                if (pred == data.condition[i]) ++correct;
            }
            const double pe = 100.0 * static_cast<double>(correct) / static_cast<double>(n);
            if (pe >= cv.pe_star) ++at_least;
        }
        out.p_values[j] = stats::pvalue_from_counts(at_least, n_perm, smoothing);
    }
    return out;
}

}  // namespace cider::learn
