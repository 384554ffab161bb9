#include "cider/synth.hpp"

#include <cmath>
#include <stdexcept>

#include "cider/rng.hpp"

namespace cider::synth {

std::vector<double> Dataset::column(std::size_t col) const {
    std::vector<double> out(rows());
    for (std::size_t r = 0; r < rows(); ++r) out[r] = at(r, col);
    return out;
}

std::vector<double> Dataset::condition_as_reals() const {
    std::vector<double> out(condition.size());
    for (std::size_t r = 0; r < condition.size(); ++r) out[r] = static_cast<double>(condition[r]);
    return out;
}

void Dataset::validate() const {
    if (rows() < 2) throw std::invalid_argument("dataset needs at least 2 rows");
    if (features.size() != rows() * cols())
        throw std::invalid_argument("dataset feature matrix size mismatch");
    bool saw0 = false, saw1 = false;
    for (std::uint8_t c : condition) {
        if (c > 1) throw std::invalid_argument("condition labels must be binary");
        (c ? saw1 : saw0) = true;
    }
    if (!saw0 || !saw1) throw std::invalid_argument("dataset must contain both condition classes");
    for (double v : features)
        if (!std::isfinite(v)) throw std::invalid_argument("dataset contains a non-finite value");
}

namespace {

const std::map<std::string, double>* mechanism_weights(const Mechanism& m) {
    if (const auto* lin = std::get_if<LinearGaussian>(&m)) return &lin->weights;
    if (const auto* quad = std::get_if<Quadratic>(&m)) return &quad->weights;
    if (const auto* logi = std::get_if<LogisticSink>(&m)) return &logi->weights;
    return nullptr;  // BernoulliRoot
}

}  // namespace

void Sem::validate() const {
    if (!dag.contains(condition))
        throw std::invalid_argument("condition node '" + condition + "' not in graph");
    if (dag.is_hidden(condition))
        throw std::invalid_argument("condition node '" + condition + "' may not be hidden");

    for (const auto& name : dag.nodes()) {
        auto it = mechanisms.find(name);
        if (it == mechanisms.end())
            throw std::invalid_argument("node '" + name + "' has no mechanism");

        const int v = dag.index_of(name);
        if (const auto* w = mechanism_weights(it->second)) {
            if (w->size() != dag.parents(v).size())
                throw std::invalid_argument("mechanism for '" + name +
                                            "' does not cover its parents");
            for (int p : dag.parents(v))
                if (w->count(dag.name_of(p)) == 0)
                    throw std::invalid_argument("mechanism for '" + name + "' missing weight for parent '" +
                                                dag.name_of(p) + "'");
        } else if (!dag.parents(v).empty()) {
            throw std::invalid_argument("bernoulli mechanism on non-root node '" + name + "'");
        }

        if (const auto* lin = std::get_if<LinearGaussian>(&it->second)) {
            if (!(lin->noise_sd > 0.0))
                throw std::invalid_argument("noise-sd for '" + name + "' must be positive");
        } else if (const auto* quad = std::get_if<Quadratic>(&it->second)) {
            if (!(quad->noise_sd > 0.0))
                throw std::invalid_argument("noise-sd for '" + name + "' must be positive");
        } else if (const auto* bern = std::get_if<BernoulliRoot>(&it->second)) {
            if (!(bern->p > 0.0 && bern->p < 1.0))
                throw std::invalid_argument("bernoulli p for '" + name + "' must lie in (0,1)");
        }
    }
    for (const auto& [name, mech] : mechanisms) {
        (void)mech;
        if (!dag.contains(name))
            throw std::invalid_argument("mechanism references unknown node '" + name + "'");
    }

    const auto& cond_mech = mechanisms.at(condition);
    if (paradigm == Paradigm::Stimulus) {
        if (!std::holds_alternative<BernoulliRoot>(cond_mech))
            throw std::invalid_argument("stimulus condition must use a bernoulli root mechanism");
    } else {
        if (!std::holds_alternative<LogisticSink>(cond_mech))
            throw std::invalid_argument("response condition must use a logistic sink mechanism");
        if (!dag.children(dag.index_of(condition)).empty())
            throw std::invalid_argument("response condition must be a sink node");
    }
}

Dataset sample(const Sem& sem, std::size_t n, std::uint64_t seed) {
    sem.validate();
    if (n < 2) throw std::invalid_argument("sample count must be at least 2");

    const auto& dag = sem.dag;
    const RngStream base(seed);
    std::vector<std::vector<double>> values(dag.size());

    for (int v : dag.topological_order()) {
        const std::string& name = dag.name_of(v);
        RngStream rng = base.child("node", name);
        auto& col = values[static_cast<std::size_t>(v)];
        col.resize(n);
        const Mechanism& mech = sem.mechanisms.at(name);

        if (const auto* bern = std::get_if<BernoulliRoot>(&mech)) {
            for (std::size_t r = 0; r < n; ++r) col[r] = rng.next_unit() < bern->p ? 1.0 : 0.0;
        } else if (const auto* logi = std::get_if<LogisticSink>(&mech)) {
            for (std::size_t r = 0; r < n; ++r) {
                double lin = logi->bias;
                for (int p : dag.parents(v))
                    lin += logi->weights.at(dag.name_of(p)) * values[static_cast<std::size_t>(p)][r];
                const double prob = 1.0 / (1.0 + std::exp(-lin));
                col[r] = rng.next_unit() < prob ? 1.0 : 0.0;
            }
        } else if (const auto* linm = std::get_if<LinearGaussian>(&mech)) {
            for (std::size_t r = 0; r < n; ++r) {
                double acc = linm->noise_sd * rng.next_gauss();
                for (int p : dag.parents(v))
                    acc += linm->weights.at(dag.name_of(p)) * values[static_cast<std::size_t>(p)][r];
                col[r] = acc;
            }
        } else {
            const auto& quad = std::get<Quadratic>(mech);
            for (std::size_t r = 0; r < n; ++r) {
                double acc = quad.noise_sd * rng.next_gauss();
                for (int p : dag.parents(v)) {
                    const double pv = values[static_cast<std::size_t>(p)][r];
                    acc += quad.weights.at(dag.name_of(p)) * pv * pv;
                }
                col[r] = acc;
            }
        }
    }

    Dataset out;
    const int cond_idx = dag.index_of(sem.condition);
    out.condition.resize(n);
    for (std::size_t r = 0; r < n; ++r)
        out.condition[r] = values[static_cast<std::size_t>(cond_idx)][r] != 0.0 ? 1 : 0;
    for (const auto& name : dag.nodes()) {
        const int v = dag.index_of(name);
        if (v == cond_idx || dag.is_hidden(v)) continue;
        out.feature_names.push_back(name);
    }
    out.features.resize(n * out.feature_names.size());
    for (std::size_t c = 0; c < out.feature_names.size(); ++c) {
        const auto& col = values[static_cast<std::size_t>(dag.index_of(out.feature_names[c]))];
        for (std::size_t r = 0; r < n; ++r) out.at(r, c) = col[r];
    }
    out.validate();
    return out;
}

std::vector<Dataset> subject_cohort(const Sem& sem, std::size_t n_subjects,
                                    std::size_t n_per_subject, std::uint64_t seed) {
    if (n_subjects < 1) throw std::invalid_argument("cohort needs at least 1 subject");
    const RngStream base(seed);
    std::vector<Dataset> out;
    out.reserve(n_subjects);
    for (std::size_t s = 0; s < n_subjects; ++s)
        out.push_back(sample(sem, n_per_subject, base.child("subject", s).key()));
    return out;
}

Sem with_default_mechanisms(const graph::Dag& dag, const std::string& condition,
                            Paradigm paradigm, std::uint64_t seed) {
    Sem sem;
    sem.dag = dag;
    sem.condition = condition;
    sem.paradigm = paradigm;
    const RngStream base(seed);
    for (const auto& name : dag.nodes()) {
        const int v = dag.index_of(name);
        RngStream rng = base.child("mech", name);
        if (name == condition && paradigm == Paradigm::Stimulus) {
            sem.mechanisms[name] = BernoulliRoot{0.5};
            continue;
        }
        std::map<std::string, double> weights;
        for (int p : dag.parents(v)) {
            const double mag = rng.next_uniform(0.6, 1.0);
            const double sign = rng.next_unit() < 0.5 ? -1.0 : 1.0;
            weights[dag.name_of(p)] = sign * mag;
        }
        if (name == condition) {
            sem.mechanisms[name] = LogisticSink{std::move(weights), 0.0};
        } else {
            sem.mechanisms[name] = LinearGaussian{std::move(weights), 1.0};
        }
    }
    sem.validate();
    return sem;
}

}  // namespace cider::synth
