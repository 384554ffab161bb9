#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cider/stats.hpp"
#include "cider/synth.hpp"

namespace cider::learn {

struct ForestConfig {
    std::size_t n_trees = 100;
    // Features tried per split; 0 means floor(sqrt(d)).
    std::size_t mtry = 0;
    std::size_t min_leaf = 1;

    // Cross-validation scheme for accuracy and importance estimates.
    // LeaveOneOut is the literal protocol; KFold is the desk-scale substitute.
    enum class Cv { LeaveOneOut, KFold };
    Cv cv = Cv::LeaveOneOut;
    std::size_t k_folds = 10;

    std::size_t resolve_mtry(std::size_t d) const;
};

// Binary decision tree; feature < 0 marks a leaf.
struct TreeNode {
    std::int32_t feature = -1;
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::array<std::uint32_t, 2> counts{{0, 0}};
};

struct Tree {
    std::vector<TreeNode> nodes;
    std::uint32_t bag_unique = 0;  // distinct samples in this tree's bootstrap

    // Returns the leaf's class counts for a feature row.
    const std::array<std::uint32_t, 2>& leaf_counts(const double* row) const;
};

// Bagged Gini forest. Votes are majority over trees; all ties (within a leaf
// and across trees) break toward the lexicographically smaller class label.
struct Forest {
    std::vector<Tree> trees;
    std::array<std::string, 2> class_labels{{"0", "1"}};
    std::size_t n_features = 0;
    std::uint64_t seed = 0;
    ForestConfig config;

    std::uint8_t predict_class(const double* row) const;
};

// Deterministic given (data, config, seed): each tree draws a bootstrap of n
// samples with replacement and then its per-node feature subsets from the
// stream (seed, "tree", t). Throws on single-class data.
Forest fit_forest(const synth::Dataset& data, const ForestConfig& config, std::uint64_t seed);

// Majority-vote prediction; returns the class label.
std::string predict(const Forest& forest, std::span<const double> row);

// Cross-validated models shared by the accuracy and importance estimates.
struct CvModels {
    std::vector<Forest> fold_forests;
    std::vector<std::int32_t> fold_of;   // trial -> fold
    std::vector<char> fold_trained;      // folds with both classes in training
    std::vector<std::uint8_t> held_out_prediction;
    double pe_star = 0.0;                // percent correct; skipped folds count as errors
    std::size_t skipped_folds = 0;
};

CvModels fit_cv_models(const synth::Dataset& data, const ForestConfig& config, std::uint64_t seed);

// Held-out percent-correct with all features intact (PE*), in [0, 100].
double loo_accuracy(const synth::Dataset& data, const ForestConfig& config, std::uint64_t seed);

// Permutation feature relevance: the fold models are fit once; permutation k
// of feature j redraws the whole column through the stream (seed, j, k) and
// re-predicts every trial with its own held-out fold forest. p_j is the
// smoothed fraction of permutations with PE(j,k) >= PE*; small p means the
// feature cannot be removed without hurting decoding.
struct ImportanceResult {
    double pe_star = 0.0;
    std::vector<stats::PValue> p_values;  // one per feature
    std::size_t skipped_folds = 0;
};

ImportanceResult permutation_importance(const synth::Dataset& data, const ForestConfig& config,
                                        std::size_t n_perm, std::uint64_t seed,
                                        stats::Smoothing smoothing = stats::Smoothing::AddOne);

}  // namespace cider::learn
