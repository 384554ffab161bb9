#include "cider/graph.hpp"

#include <algorithm>
#include <stdexcept>

namespace cider::graph {

std::string to_string(EffectClass e) {
    switch (e) {
        case EffectClass::DirectEffect: return "direct effect";
        case EffectClass::IndirectEffect: return "indirect effect";
        case EffectClass::NonEffect: return "no effect";
    }
    return "?";
}

int Dag::add_node(const std::string& name) {
    if (name.empty()) throw std::invalid_argument("node name must be nonempty");
    auto it = index_.find(name);
    if (it != index_.end()) return it->second;
    const int v = static_cast<int>(names_.size());
    names_.push_back(name);
    index_.emplace(name, v);
    parents_.emplace_back();
    children_.emplace_back();
    hidden_.push_back(0);
    return v;
}

bool Dag::has_edge(int tail, int head) const {
    const auto& ch = children_[static_cast<std::size_t>(tail)];
    return std::find(ch.begin(), ch.end(), head) != ch.end();
}

bool Dag::reaches(int from, int to) const {
    if (from == to) return true;
    std::vector<char> seen(size(), 0);
    std::vector<int> stack{from};
    seen[static_cast<std::size_t>(from)] = 1;
    while (!stack.empty()) {
        const int v = stack.back();
        stack.pop_back();
        for (int c : children(v)) {
            if (c == to) return true;
            if (!seen[static_cast<std::size_t>(c)]) {
                seen[static_cast<std::size_t>(c)] = 1;
                stack.push_back(c);
            }
        }
    }
    return false;
}

void Dag::add_edge(const std::string& tail, const std::string& head) {
    if (tail == head) throw std::invalid_argument("self-loop on node '" + tail + "'");
    const int t = add_node(tail);
    const int h = add_node(head);
    if (has_edge(t, h)) throw std::invalid_argument("duplicate edge " + tail + " -> " + head);
    if (reaches(h, t))
        throw std::invalid_argument("edge " + tail + " -> " + head + " would create a cycle");
    children_[static_cast<std::size_t>(t)].push_back(h);
    parents_[static_cast<std::size_t>(h)].push_back(t);
    ++edge_count_;
}

void Dag::mark_hidden(const std::string& name) {
    hidden_[static_cast<std::size_t>(add_node(name))] = 1;
}

int Dag::index_of(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::invalid_argument("unknown node '" + name + "'");
    return it->second;
}

std::vector<int> Dag::topological_order() const {
    std::vector<int> indeg(size(), 0);
    for (std::size_t v = 0; v < size(); ++v) indeg[v] = static_cast<int>(parents_[v].size());
    std::vector<int> order;
    order.reserve(size());
    std::vector<int> ready;
    for (int v = static_cast<int>(size()) - 1; v >= 0; --v)
        if (indeg[static_cast<std::size_t>(v)] == 0) ready.push_back(v);
    while (!ready.empty()) {
        const int v = ready.back();
        ready.pop_back();
        order.push_back(v);
        for (int c : children(v))
            if (--indeg[static_cast<std::size_t>(c)] == 0) ready.push_back(c);
    }
    if (order.size() != size()) throw std::logic_error("graph is not acyclic");
    return order;
}

std::vector<char> Dag::descendants(int v) const {
    std::vector<char> out(size(), 0);
    std::vector<int> stack{v};
    while (!stack.empty()) {
        const int u = stack.back();
        stack.pop_back();
        for (int c : children(u)) {
            if (!out[static_cast<std::size_t>(c)]) {
                out[static_cast<std::size_t>(c)] = 1;
                stack.push_back(c);
            }
        }
    }
    return out;
}

std::vector<std::string> Dag::hidden_nodes() const {
    std::vector<std::string> out;
    for (std::size_t v = 0; v < size(); ++v)
        if (hidden_[v]) out.push_back(names_[v]);
    return out;
}

namespace {

std::vector<char> indicator(const Dag& dag, const std::vector<std::string>& names) {
    std::vector<char> in(dag.size(), 0);
    for (const auto& n : names) in[static_cast<std::size_t>(dag.index_of(n))] = 1;
    return in;
}

// Nodes reachable from `source` along active trails given the conditioning
// set: the standard two-direction traversal over (node, approach) states.
// `up` means the trail arrives against an edge (from a child).
std::vector<char> active_reachable(const Dag& dag, int source, const std::vector<char>& in_z) {
    const std::size_t n = dag.size();

    // z together with its ancestors; colliders bounce only inside this set.
    std::vector<char> z_or_anc(in_z);
    {
        std::vector<int> stack;
        for (std::size_t v = 0; v < n; ++v)
            if (in_z[v]) stack.push_back(static_cast<int>(v));
        while (!stack.empty()) {
            const int v = stack.back();
            stack.pop_back();
            for (int p : dag.parents(v)) {
                if (!z_or_anc[static_cast<std::size_t>(p)]) {
                    z_or_anc[static_cast<std::size_t>(p)] = 1;
                    stack.push_back(p);
                }
            }
        }
    }

    std::vector<char> visited_up(n, 0), visited_down(n, 0), reachable(n, 0);
    // (node, came_from_child)
    std::vector<std::pair<int, bool>> stack{{source, true}};
    while (!stack.empty()) {
        const auto [v, up] = stack.back();
        stack.pop_back();
        auto& visited = up ? visited_up : visited_down;
        if (visited[static_cast<std::size_t>(v)]) continue;
        visited[static_cast<std::size_t>(v)] = 1;
        if (!in_z[static_cast<std::size_t>(v)]) reachable[static_cast<std::size_t>(v)] = 1;

        if (up) {
            if (!in_z[static_cast<std::size_t>(v)]) {
                for (int p : dag.parents(v)) stack.emplace_back(p, true);
                for (int c : dag.children(v)) stack.emplace_back(c, false);
            }
        } else {
            if (!in_z[static_cast<std::size_t>(v)])
                for (int c : dag.children(v)) stack.emplace_back(c, false);
            if (z_or_anc[static_cast<std::size_t>(v)])  // collider with observed descendant
                for (int p : dag.parents(v)) stack.emplace_back(p, true);
        }
    }
    return reachable;
}

}  // namespace

bool is_d_separated(const Dag& dag, const std::string& a, const std::string& b,
                    const std::vector<std::string>& given) {
    if (a == b) throw std::invalid_argument("d-separation query requires distinct nodes");
    const int ia = dag.index_of(a);
    const int ib = dag.index_of(b);
    const auto in_z = indicator(dag, given);
    if (in_z[static_cast<std::size_t>(ia)] || in_z[static_cast<std::size_t>(ib)])
        throw std::invalid_argument("query node may not appear in the conditioning set");
    const auto reach = active_reachable(dag, ia, in_z);
    return !reach[static_cast<std::size_t>(ib)];
}

bool is_d_separated_sets(const Dag& dag, const std::vector<std::string>& a_set,
                         const std::vector<std::string>& b_set,
                         const std::vector<std::string>& given) {
    if (a_set.empty() || b_set.empty())
        throw std::invalid_argument("d-separation over sets requires nonempty A and B");
    const auto in_a = indicator(dag, a_set);
    const auto in_b = indicator(dag, b_set);
    const auto in_z = indicator(dag, given);
    for (std::size_t v = 0; v < dag.size(); ++v)
        if ((in_a[v] && in_b[v]) || (in_a[v] && in_z[v]) || (in_b[v] && in_z[v]))
            throw std::invalid_argument("node sets must be pairwise disjoint (node '" +
                                        dag.nodes()[v] + "')");
    for (const auto& a : a_set)
        for (const auto& b : b_set)
            if (!is_d_separated(dag, a, b, given)) return false;
    return true;
}

std::vector<std::vector<std::string>> directed_paths(const Dag& dag, const std::string& a,
                                                     const std::string& b) {
    if (a == b) throw std::invalid_argument("path query requires distinct nodes");
    const int start = dag.index_of(a);
    const int goal = dag.index_of(b);

    std::vector<std::vector<std::string>> out;
    std::vector<int> path{start};
    std::vector<char> on_path(dag.size(), 0);
    on_path[static_cast<std::size_t>(start)] = 1;

    // DFS in child insertion order keeps the output order deterministic.
    auto dfs = [&](auto&& self, int v) -> void {
        if (v == goal) {
            std::vector<std::string> names;
            names.reserve(path.size());
            for (int u : path) names.push_back(dag.name_of(u));
            out.push_back(std::move(names));
            return;
        }
        for (int c : dag.children(v)) {
            if (on_path[static_cast<std::size_t>(c)]) continue;
            on_path[static_cast<std::size_t>(c)] = 1;
            path.push_back(c);
            self(self, c);
            path.pop_back();
            on_path[static_cast<std::size_t>(c)] = 0;
        }
    };
    dfs(dfs, start);
    return out;
}

EffectClass classify_effect(const Dag& dag, const std::string& cause, const std::string& target,
                            const std::vector<std::string>& observed) {
    if (cause == target) throw std::invalid_argument("cause and target must differ");
    const auto in_obs = indicator(dag, observed);
    const int ic = dag.index_of(cause);
    const int ix = dag.index_of(target);
    if (!in_obs[static_cast<std::size_t>(ic)] || !in_obs[static_cast<std::size_t>(ix)])
        throw std::invalid_argument("cause and target must be members of the observed set");

    const auto paths = directed_paths(dag, cause, target);
    if (paths.empty()) return EffectClass::NonEffect;
    for (const auto& p : paths) {
        bool all_unobserved = true;
        for (std::size_t i = 1; i + 1 < p.size(); ++i) {
            if (in_obs[static_cast<std::size_t>(dag.index_of(p[i]))]) {
                all_unobserved = false;
                break;
            }
        }
        if (all_unobserved) return EffectClass::DirectEffect;
    }
    return EffectClass::IndirectEffect;
}

std::vector<RelevancePair> oracle_relevance(const Dag& dag, const std::string& condition,
                                            const std::vector<std::string>& features) {
    dag.index_of(condition);
    for (const auto& f : features) {
        if (f == condition)
            throw std::invalid_argument("condition '" + condition + "' listed among features");
        if (dag.is_hidden(f))
            throw std::invalid_argument("hidden node '" + f + "' cannot be an observed feature");
    }
    std::vector<RelevancePair> out;
    out.reserve(features.size());
    for (const auto& f : features) {
        std::vector<std::string> rest;
        for (const auto& g : features)
            if (g != f) rest.push_back(g);
        RelevancePair pair;
        pair.feature = f;
        pair.encoding_relevant = !is_d_separated(dag, condition, f, {});
        pair.decoding_relevant = !is_d_separated(dag, condition, f, rest);
        out.push_back(std::move(pair));
    }
    return out;
}

std::vector<IndependenceStatement> implied_independencies(const Dag& dag,
                                                          const std::vector<std::string>& observed) {
    for (const auto& n : observed) dag.index_of(n);
    std::vector<IndependenceStatement> out;
    const std::size_t m = observed.size();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i + 1; j < m; ++j) {
            std::vector<std::string> others;
            for (std::size_t k = 0; k < m; ++k)
                if (k != i && k != j) others.push_back(observed[k]);
            const std::size_t subsets = std::size_t{1} << others.size();
            for (std::size_t mask = 0; mask < subsets; ++mask) {
                std::vector<std::string> z;
                for (std::size_t k = 0; k < others.size(); ++k)
                    if (mask & (std::size_t{1} << k)) z.push_back(others[k]);
                if (is_d_separated(dag, observed[i], observed[j], z))
                    out.push_back({observed[i], observed[j], std::move(z)});
            }
        }
    }
    return out;
}

}  // namespace cider::graph
