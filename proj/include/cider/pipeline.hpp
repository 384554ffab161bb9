#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cider/common.hpp"
#include "cider/learn.hpp"
#include "cider/stats.hpp"
#include "cider/synth.hpp"

namespace cider::pipeline {

enum class Relevance { Relevant, Irrelevant, Indeterminate };

std::string to_string(Relevance r);

// Group decision bands: Relevant below alpha, Irrelevant above beta,
// Indeterminate in between.
struct Thresholds {
    double alpha = 0.05;
    double beta = 0.10;

    void validate() const;
};

Relevance decide(double group_p, const Thresholds& t);

// Subjects x features p-values for one analysis side.
struct RelevanceMatrix {
    enum class Side { Encoding, Decoding };

    Side side = Side::Encoding;
    std::vector<std::string> features;
    std::vector<std::vector<stats::PValue>> p;  // [subject][feature]

    std::size_t n_subjects() const { return p.size(); }
    void validate() const;  // rectangular, all values in [0,1]
};

struct FeatureDecision {
    std::string feature;
    stats::PValue ks_p;
    Relevance decision = Relevance::Indeterminate;
};

struct AnalysisConfig {
    Paradigm paradigm = Paradigm::Stimulus;
    Thresholds thresholds;
    std::size_t n_perm_hsic = 1000;
    std::size_t n_perm_importance = 1000;
    std::size_t n_mc_ks = 100000;
    learn::ForestConfig forest;
    stats::Smoothing smoothing = stats::Smoothing::AddOne;
    std::uint64_t seed = 0;

    void validate() const;
};

// HSIC permutation test of every feature against the condition, per subject.
// Gaussian kernel (median heuristic) on the feature, delta kernel on the
// binary condition.
RelevanceMatrix encoding_relevance(const std::vector<synth::Dataset>& cohort,
                                   const AnalysisConfig& cfg);

// Random-forest permutation importance per subject; PE* values are retained
// for the group-level above-chance check.
struct DecodingRelevance {
    RelevanceMatrix matrix;
    std::vector<double> pe_star;  // one per subject
    std::size_t skipped_folds = 0;
};

DecodingRelevance decoding_relevance(const std::vector<synth::Dataset>& cohort,
                                     const AnalysisConfig& cfg);

// Group aggregation: per feature, a KS uniformity test over the per-subject
// p-values; irrelevant features should produce uniform p-values.
std::vector<FeatureDecision> group_aggregate(const RelevanceMatrix& matrix, const Thresholds& t,
                                             std::size_t n_mc, std::uint64_t seed);

// Disjoint feature partition by (encoding, decoding) group decisions; any
// indeterminate side sends the feature to the indeterminate set.
struct FeaturePartition {
    std::vector<std::string> enc_dec;        // relevant in both
    std::vector<std::string> enc_only;       // encoding-relevant, decoding-irrelevant
    std::vector<std::string> dec_only;       // encoding-irrelevant, decoding-relevant
    std::vector<std::string> neither;        // irrelevant in both
    std::vector<std::string> indeterminate;

    // Per-feature decisions, retained for the rule engine.
    std::vector<std::string> features;
    std::vector<Relevance> enc;
    std::vector<Relevance> dec;

    std::vector<std::string> encoding_relevant() const;  // enc_dec + enc_only
};

FeaturePartition partition(const std::vector<FeatureDecision>& enc,
                           const std::vector<FeatureDecision>& dec);

// One emitted causal statement. `rule` is a catalog identifier (S1-S8 /
// R1-R8) or empty for notes and set-level deductions.
struct Statement {
    std::string feature;  // empty for set-level statements
    std::string rule;
    std::string conclusion;
    bool inconclusive = false;
};

// The full rule catalog for one feature: single-model statements from each
// determined side plus one combined statement when both are determined.
// Total over {Stimulus, Response} x {Relevant, Irrelevant, Indeterminate}^2.
std::vector<Statement> rule_statements(Paradigm paradigm, Relevance enc, Relevance dec);

struct CausalReport {
    Paradigm paradigm = Paradigm::Stimulus;
    FeaturePartition partition;
    std::vector<Statement> statements;  // per-feature rule statements
    std::vector<Statement> combined;    // combined-model deductions
    std::vector<std::string> warnings;
    std::vector<std::string> notes;

    // Provenance
    AnalysisConfig config;
    std::array<std::string, 2> class_labels{{"0", "1"}};
    std::vector<FeatureDecision> enc_decisions;
    std::vector<FeatureDecision> dec_decisions;
    RelevanceMatrix enc_matrix;
    RelevanceMatrix dec_matrix;
    std::vector<double> pe_star;
    std::optional<stats::PValue> decoding_group_p;  // Wilcoxon PE* vs 50
    bool decoding_gate_passed = false;

    std::string to_json() const;
    std::string to_text() const;
};

// Rule-tagged statements for every feature of a partition; total function.
CausalReport interpret(Paradigm paradigm, const FeaturePartition& part);

struct CombinedInference {
    std::vector<Statement> statements;
    std::vector<std::string> warnings;
};

// Stimulus paradigm: if any feature is encoding-relevant, some effect must be
// direct with respect to the observed set; decoding-relevance locates the
// candidates. An encoding-relevant set with no decoding-relevant member is
// contradictory and raises a consistency warning. The response paradigm adds
// nothing beyond rule R6.
CombinedInference combined_inference(Paradigm paradigm, const FeaturePartition& part);

// End-to-end: relevance analyses, group aggregation, partition, rules,
// combined deductions. Deterministic given (cohort, cfg).
CausalReport run_analysis(const std::vector<synth::Dataset>& cohort, const AnalysisConfig& cfg);

}  // namespace cider::pipeline
