#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace cider::graph {

// Effect classification relative to a named observed node set: a cause with a
// directed path avoiding every observed intermediate is direct; one whose
// directed paths all pass through an observed node is indirect.
enum class EffectClass { DirectEffect, IndirectEffect, NonEffect };

std::string to_string(EffectClass e);

// Labeled directed acyclic graph with optional hidden (unobservable) nodes.
// Node order is insertion order and fixes the order of all derived output.
// Immutable in practice: all query operations are const and pure.
class Dag {
public:
    Dag() = default;

    // Adds a node if absent; returns its index. Names are case-sensitive.
    int add_node(const std::string& name);
    // Adds tail -> head, creating nodes as needed. Rejects self-loops,
    // duplicate edges, and edges that would close a cycle.
    void add_edge(const std::string& tail, const std::string& head);
    void mark_hidden(const std::string& name);

    std::size_t size() const { return names_.size(); }
    std::size_t edge_count() const { return edge_count_; }
    const std::vector<std::string>& nodes() const { return names_; }
    bool contains(const std::string& name) const { return index_.count(name) > 0; }
    bool is_hidden(int v) const { return hidden_[static_cast<std::size_t>(v)]; }
    bool is_hidden(const std::string& name) const { return is_hidden(index_of(name)); }
    bool has_edge(int tail, int head) const;

    // Throws std::invalid_argument on unknown names.
    int index_of(const std::string& name) const;
    const std::string& name_of(int v) const { return names_[static_cast<std::size_t>(v)]; }

    const std::vector<int>& parents(int v) const { return parents_[static_cast<std::size_t>(v)]; }
    const std::vector<int>& children(int v) const { return children_[static_cast<std::size_t>(v)]; }

    std::vector<int> topological_order() const;
    // Proper descendants of v (v itself excluded), as an indicator vector.
    std::vector<char> descendants(int v) const;
    std::vector<std::string> hidden_nodes() const;

private:
    bool reaches(int from, int to) const;

    std::vector<std::string> names_;
    std::unordered_map<std::string, int> index_;
    std::vector<std::vector<int>> parents_;
    std::vector<std::vector<int>> children_;
    std::vector<char> hidden_;
    std::size_t edge_count_ = 0;
};

// True iff every path between a and b is blocked by `given`: a non-collider
// on the path is in `given`, or a collider has neither itself nor any
// descendant in `given`. Requires a != b and a, b not in `given`.
bool is_d_separated(const Dag& dag, const std::string& a, const std::string& b,
                    const std::vector<std::string>& given);

// Set version: holds iff is_d_separated holds for every pair in A x B.
// A, B, Z must be pairwise disjoint; A and B nonempty.
bool is_d_separated_sets(const Dag& dag, const std::vector<std::string>& a_set,
                         const std::vector<std::string>& b_set,
                         const std::vector<std::string>& given);

// All simple directed paths a -> ... -> b as ordered node-name lists.
std::vector<std::vector<std::string>> directed_paths(const Dag& dag, const std::string& a,
                                                     const std::string& b);

// Requires cause and target to be members of `observed`.
EffectClass classify_effect(const Dag& dag, const std::string& cause, const std::string& target,
                            const std::vector<std::string>& observed);

// Ground-truth feature relevance under faithfulness:
// encoding-relevant  <=> condition and feature are d-connected marginally,
// decoding-relevant  <=> d-connected given all remaining features.
struct RelevancePair {
    std::string feature;
    bool encoding_relevant = false;
    bool decoding_relevant = false;
};

std::vector<RelevancePair> oracle_relevance(const Dag& dag, const std::string& condition,
                                            const std::vector<std::string>& features);

struct IndependenceStatement {
    std::string a;
    std::string b;
    std::vector<std::string> given;
};

// Every (a, b, Z) with a, b in `observed`, Z subset of observed \ {a, b},
// such that a and b are d-separated by Z. Exponential in |observed|; meant
// for the small fixture graphs used to generate test batteries.
std::vector<IndependenceStatement> implied_independencies(const Dag& dag,
                                                          const std::vector<std::string>& observed);

}  // namespace cider::graph
