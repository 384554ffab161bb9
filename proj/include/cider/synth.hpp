#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "cider/common.hpp"
#include "cider/graph.hpp"

namespace cider::synth {

// Per-node generating mechanisms. Weights must be keyed exactly by the node's
// parents in the DAG; noise-sd must be positive.
struct LinearGaussian {
    std::map<std::string, double> weights;
    double noise_sd = 1.0;
};

// value = sum w * parent^2 + noise; dependence with vanishing correlation.
struct Quadratic {
    std::map<std::string, double> weights;
    double noise_sd = 1.0;
};

// Root-only binary mechanism; used for a randomized stimulus.
struct BernoulliRoot {
    double p = 0.5;
};

// Binary node drawn from sigmoid(sum w * parent + bias); used for a response.
struct LogisticSink {
    std::map<std::string, double> weights;
    double bias = 0.0;
};

using Mechanism = std::variant<LinearGaussian, Quadratic, BernoulliRoot, LogisticSink>;

// A DAG plus one mechanism per node and a designated binary condition node.
struct Sem {
    graph::Dag dag;
    std::map<std::string, Mechanism> mechanisms;
    std::string condition;
    Paradigm paradigm = Paradigm::Stimulus;

    // Throws std::invalid_argument on any mechanism/parent mismatch, a
    // missing or extra mechanism, or a condition that does not match the
    // paradigm hint (Stimulus: BernoulliRoot on a root; Response:
    // LogisticSink on a sink).
    void validate() const;
};

// Per-subject table: one binary condition column plus d real feature columns.
struct Dataset {
    std::vector<std::uint8_t> condition;           // one 0/1 label per row
    std::array<std::string, 2> class_labels{{"0", "1"}};
    std::vector<std::string> feature_names;
    std::vector<double> features;                  // row-major, rows() x cols()

    std::size_t rows() const { return condition.size(); }
    std::size_t cols() const { return feature_names.size(); }
    double at(std::size_t row, std::size_t col) const { return features[row * cols() + col]; }
    double& at(std::size_t row, std::size_t col) { return features[row * cols() + col]; }
    std::vector<double> column(std::size_t col) const;
    std::vector<double> condition_as_reals() const;

    // n >= 2, both classes present, all cells finite, sizes consistent.
    void validate() const;
};

// Draws n iid rows by evaluating nodes in topological order. Hidden nodes are
// computed but dropped from the output. Noise is drawn from per-node streams
// keyed by node name, so identical (sem, n, seed) give bit-identical output
// regardless of declaration or evaluation order.
Dataset sample(const Sem& sem, std::size_t n, std::uint64_t seed);

// Independent datasets with per-subject derived seed streams.
std::vector<Dataset> subject_cohort(const Sem& sem, std::size_t n_subjects,
                                    std::size_t n_per_subject, std::uint64_t seed);

// Attaches default mechanisms to a bare DAG: the condition becomes a
// Bernoulli(0.5) root (Stimulus) or logistic sink (Response); every other
// node gets linear-Gaussian weights with |w| drawn uniformly from
// [0.6, 1.0], random sign, noise-sd 1.
Sem with_default_mechanisms(const graph::Dag& dag, const std::string& condition,
                            Paradigm paradigm, std::uint64_t seed);

}  // namespace cider::synth
