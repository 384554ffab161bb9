#include "cider/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include <json.hpp>

#include "cider/rng.hpp"

namespace cider::pipeline {

namespace {

// Group-level gate: decoding statements require above-chance decoding.
constexpr double kDecodingGateAlpha = 0.05;
constexpr double kChanceLevelPercent = 50.0;

constexpr const char* kHiddenConfounderCaveat =
    "response paradigm: features potentially being a cause and genuine causes cannot be "
    "distinguished without further assumptions (hidden confounders)";

[[noreturn]] void rethrow_with_stage(const char* stage) {
    try {
        throw;
    } catch (const InputError& e) {
        throw InputError(std::string("stage ") + stage + ": " + e.what());
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(std::string("stage ") + stage + ": " + e.what());
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("stage ") + stage + ": " + e.what());
    }
}

template <typename F>
auto stage(const char* name, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (...) {
        rethrow_with_stage(name);
    }
}

void check_cohort(const std::vector<synth::Dataset>& cohort) {
    if (cohort.empty()) throw std::invalid_argument("empty cohort");
    cohort.front().validate();
    for (std::size_t s = 1; s < cohort.size(); ++s) {
        cohort[s].validate();
        if (cohort[s].feature_names != cohort.front().feature_names)
            throw std::invalid_argument("subject " + std::to_string(s + 1) +
                                        " feature schema differs from subject 1");
        if (cohort[s].class_labels != cohort.front().class_labels)
            throw std::invalid_argument("subject " + std::to_string(s + 1) +
                                        " class labels differ from subject 1");
    }
}

std::string set_text(const std::vector<std::string>& names) {
    std::string out = "{";
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (i) out += ", ";
        out += names[i];
    }
    out += "}";
    return out;
}

std::string fmt_p(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

}  // namespace

std::string to_string(Relevance r) {
    switch (r) {
        case Relevance::Relevant: return "relevant";
        case Relevance::Irrelevant: return "irrelevant";
        case Relevance::Indeterminate: return "indeterminate";
    }
    return "?";
}

void Thresholds::validate() const {
    if (!(alpha > 0.0 && beta < 1.0 && alpha < beta))
        throw std::invalid_argument("thresholds must satisfy 0 < alpha < beta < 1");
}

Relevance decide(double group_p, const Thresholds& t) {
    t.validate();
    if (group_p < t.alpha) return Relevance::Relevant;
    if (group_p > t.beta) return Relevance::Irrelevant;
    return Relevance::Indeterminate;
}

void RelevanceMatrix::validate() const {
    for (const auto& row : p) {
        if (row.size() != features.size())
            throw std::invalid_argument("relevance matrix is not rectangular");
        for (const auto& pv : row)
            if (!(pv.value >= 0.0 && pv.value <= 1.0))
                throw std::invalid_argument("relevance matrix p-value outside [0,1]");
    }
}

void AnalysisConfig::validate() const {
    thresholds.validate();
    if (n_perm_hsic < 1 || n_perm_importance < 1 || n_mc_ks < 1)
        throw std::invalid_argument("permutation and Monte-Carlo counts must be at least 1");
    if (forest.n_trees < 1) throw std::invalid_argument("forest needs at least one tree");
}

RelevanceMatrix encoding_relevance(const std::vector<synth::Dataset>& cohort,
                                   const AnalysisConfig& cfg) {
    check_cohort(cohort);
    cfg.validate();
    RelevanceMatrix m;
    m.side = RelevanceMatrix::Side::Encoding;
    m.features = cohort.front().feature_names;
    m.p.resize(cohort.size());

    const RngStream base = RngStream(cfg.seed).child("encoding");
    for (std::size_t s = 0; s < cohort.size(); ++s) {
        const auto& data = cohort[s];
        const auto cond = data.condition_as_reals();
        const RngStream subject_stream = base.child("subject", s);
        m.p[s].resize(m.features.size());
        for (std::size_t j = 0; j < m.features.size(); ++j) {
            const auto col = data.column(j);
            m.p[s][j] = stats::hsic_perm_test(col, cond, stats::KernelSpec::gaussian(),
                                              stats::KernelSpec::delta(), cfg.n_perm_hsic,
                                              subject_stream.child("feature", j).key(),
                                              cfg.smoothing);
        }
    }
    return m;
}

DecodingRelevance decoding_relevance(const std::vector<synth::Dataset>& cohort,
                                     const AnalysisConfig& cfg) {
    check_cohort(cohort);
    cfg.validate();
    DecodingRelevance out;
    out.matrix.side = RelevanceMatrix::Side::Decoding;
    out.matrix.features = cohort.front().feature_names;
    out.matrix.p.resize(cohort.size());
    out.pe_star.resize(cohort.size());

    const RngStream base = RngStream(cfg.seed).child("decoding");
    for (std::size_t s = 0; s < cohort.size(); ++s) {
        const auto imp = learn::permutation_importance(cohort[s], cfg.forest,
                                                       cfg.n_perm_importance,
                                                       base.child("subject", s).key(),
                                                       cfg.smoothing);
        out.matrix.p[s] = imp.p_values;
        out.pe_star[s] = imp.pe_star;
        out.skipped_folds += imp.skipped_folds;
    }
    return out;
}

std::vector<FeatureDecision> group_aggregate(const RelevanceMatrix& matrix, const Thresholds& t,
                                             std::size_t n_mc, std::uint64_t seed) {
    if (matrix.p.empty()) throw std::invalid_argument("relevance matrix has no subjects");
    matrix.validate();
    t.validate();

    const RngStream base(seed);
    std::vector<FeatureDecision> out;
    out.reserve(matrix.features.size());
    std::vector<double> column(matrix.n_subjects());
    for (std::size_t j = 0; j < matrix.features.size(); ++j) {
        for (std::size_t s = 0; s < matrix.n_subjects(); ++s) column[s] = matrix.p[s][j].value;
        FeatureDecision fd;
        fd.feature = matrix.features[j];
        fd.ks_p = stats::ks_uniformity_test(column, n_mc, base.child("feature", j).key());
        fd.decision = decide(fd.ks_p.value, t);
        out.push_back(std::move(fd));
    }
    return out;
}

std::vector<std::string> FeaturePartition::encoding_relevant() const {
    std::vector<std::string> out = enc_dec;
    out.insert(out.end(), enc_only.begin(), enc_only.end());
    return out;
}

FeaturePartition partition(const std::vector<FeatureDecision>& enc,
                           const std::vector<FeatureDecision>& dec) {
    if (enc.size() != dec.size())
        throw std::invalid_argument("encoding and decoding decisions cover different feature sets");
    FeaturePartition part;
    for (std::size_t i = 0; i < enc.size(); ++i) {
        if (enc[i].feature != dec[i].feature)
            throw std::invalid_argument("feature mismatch between sides: '" + enc[i].feature +
                                        "' vs '" + dec[i].feature + "'");
        part.features.push_back(enc[i].feature);
        part.enc.push_back(enc[i].decision);
        part.dec.push_back(dec[i].decision);

        const Relevance e = enc[i].decision;
        const Relevance d = dec[i].decision;
        if (e == Relevance::Indeterminate || d == Relevance::Indeterminate)
            part.indeterminate.push_back(enc[i].feature);
        else if (e == Relevance::Relevant && d == Relevance::Relevant)
            part.enc_dec.push_back(enc[i].feature);
        else if (e == Relevance::Relevant)
            part.enc_only.push_back(enc[i].feature);
        else if (d == Relevance::Relevant)
            part.dec_only.push_back(enc[i].feature);
        else
            part.neither.push_back(enc[i].feature);
    }
    return part;
}

std::vector<Statement> rule_statements(Paradigm paradigm, Relevance enc, Relevance dec) {
    const bool stim = paradigm == Paradigm::Stimulus;
    std::vector<Statement> out;

    // Single-model statements.
    if (enc == Relevance::Relevant) {
        if (stim)
            out.push_back({"", "S1", "effect of S", false});
        else
            out.push_back({"", "R1", "inconclusive", true});
    } else if (enc == Relevance::Irrelevant) {
        if (stim)
            out.push_back({"", "S2", "no effect of S", false});
        else
            out.push_back({"", "R2", "no cause of R", false});
    } else {
        out.push_back({"", "", "encoding decision indeterminate (group p-value between alpha and beta)",
                       true});
    }

    if (dec == Relevance::Relevant) {
        out.push_back({"", stim ? "S3" : "R3", "inconclusive", true});
    } else if (dec == Relevance::Irrelevant) {
        out.push_back({"", stim ? "S4" : "R4", "inconclusive", true});
    } else {
        out.push_back({"", "", "decoding decision indeterminate (group p-value between alpha and beta)",
                       true});
    }

    // Combined statement, only when both sides are determined.
    if (enc != Relevance::Indeterminate && dec != Relevance::Indeterminate) {
        const bool enc_rel = enc == Relevance::Relevant;
        const bool dec_rel = dec == Relevance::Relevant;
        if (stim) {
            if (enc_rel && dec_rel)
                out.push_back({"", "S5", "effect of S", false});
            else if (enc_rel)
                out.push_back({"", "S6", "indirect effect of S", false});
            else if (dec_rel)
                out.push_back({"", "S7", "provides brain state context", false});
            else
                out.push_back({"", "S8", "neither effect nor provides brain state context", false});
        } else {
            if (enc_rel && dec_rel)
                out.push_back({"", "R5", "inconclusive", true});
            else if (enc_rel)
                out.push_back({"", "R6", "no direct cause of R", false});
            else if (dec_rel)
                out.push_back({"", "R7", "provides brain state context", false});
            else
                out.push_back({"", "R8", "neither cause nor provides brain state context", false});
        }
    } else {
        out.push_back({"", "", "no combined rule: a group decision is indeterminate", true});
    }
    return out;
}

CausalReport interpret(Paradigm paradigm, const FeaturePartition& part) {
    CausalReport report;
    report.paradigm = paradigm;
    report.partition = part;
    for (std::size_t i = 0; i < part.features.size(); ++i) {
        auto stmts = rule_statements(paradigm, part.enc[i], part.dec[i]);
        for (auto& s : stmts) {
            s.feature = part.features[i];
            report.statements.push_back(std::move(s));
        }
    }
    if (paradigm == Paradigm::Response) report.notes.emplace_back(kHiddenConfounderCaveat);
    if (!part.indeterminate.empty())
        report.notes.push_back("indeterminate features excluded from causal statements: " +
                               set_text(part.indeterminate));
    return report;
}

CombinedInference combined_inference(Paradigm paradigm, const FeaturePartition& part) {
    CombinedInference out;
    if (paradigm == Paradigm::Response) return out;  // nothing beyond rule R6

    const auto enc_relevant = part.encoding_relevant();
    if (enc_relevant.empty()) return out;

    if (!part.enc_dec.empty()) {
        Statement s;
        s.rule = "";
        s.conclusion = "at least one member of " + set_text(part.enc_dec) +
                       " is a direct effect of S wrt the observed set";
        out.statements.push_back(std::move(s));
    } else {
        out.warnings.push_back(
            "inconsistent evidence: " + set_text(enc_relevant) +
            " are effects of S yet none is decoding-relevant; at least one effect must be a "
            "direct effect wrt the observed set, indicating test error or violated assumptions");
    }
    return out;
}

CausalReport run_analysis(const std::vector<synth::Dataset>& cohort, const AnalysisConfig& cfg) {
    stage("ingestion", [&] { check_cohort(cohort); cfg.validate(); return 0; });

    const RelevanceMatrix enc = stage("encoding", [&] { return encoding_relevance(cohort, cfg); });
    const DecodingRelevance dec =
        stage("decoding", [&] { return decoding_relevance(cohort, cfg); });

    const RngStream base(cfg.seed);
    auto enc_decisions = stage("group-aggregate", [&] {
        return group_aggregate(enc, cfg.thresholds, cfg.n_mc_ks, base.child("group-enc").key());
    });
    auto dec_decisions = stage("group-aggregate", [&] {
        return group_aggregate(dec.matrix, cfg.thresholds, cfg.n_mc_ks,
                               base.child("group-dec").key());
    });

    // Above-chance gate for the decoding side.
    std::optional<stats::PValue> wilcoxon;
    bool gate = false;
    std::string gate_note;
    if (dec.pe_star.size() >= 6) {
        try {
            wilcoxon = stats::wilcoxon_signed_rank(dec.pe_star, kChanceLevelPercent);
            gate = wilcoxon->value < kDecodingGateAlpha;
            if (!gate)
                gate_note = "chance-level decoding not rejected (Wilcoxon p = " +
                            fmt_p(wilcoxon->value) + "); decoding decisions downgraded to indeterminate";
        } catch (const std::invalid_argument&) {
            gate_note = "decoding accuracies degenerate at chance level; decoding decisions "
                        "downgraded to indeterminate";
        }
    } else {
        gate_note = "fewer than 6 subjects: the group-level above-chance check cannot run; "
                    "decoding decisions downgraded to indeterminate";
    }
    if (!gate)
        for (auto& d : dec_decisions) d.decision = Relevance::Indeterminate;

    const FeaturePartition part =
        stage("partition", [&] { return partition(enc_decisions, dec_decisions); });

    CausalReport report = stage("interpret", [&] { return interpret(cfg.paradigm, part); });
    const CombinedInference ci =
        stage("combined-inference", [&] { return combined_inference(cfg.paradigm, part); });
    report.combined = ci.statements;
    report.warnings = ci.warnings;
    if (!gate_note.empty()) report.warnings.push_back(gate_note);
    if (dec.skipped_folds > 0)
        report.warnings.push_back(std::to_string(dec.skipped_folds) +
                                  " cross-validation fold(s) skipped for single-class training data");

    report.config = cfg;
    report.class_labels = cohort.front().class_labels;
    report.enc_decisions = std::move(enc_decisions);
    report.dec_decisions = std::move(dec_decisions);
    report.enc_matrix = enc;
    report.dec_matrix = dec.matrix;
    report.pe_star = dec.pe_star;
    report.decoding_group_p = wilcoxon;
    report.decoding_gate_passed = gate;
    return report;
}

namespace {

nlohmann::ordered_json config_json(const AnalysisConfig& cfg) {
    nlohmann::ordered_json j;
    j["paradigm"] = to_string(cfg.paradigm);
    j["alpha"] = cfg.thresholds.alpha;
    j["beta"] = cfg.thresholds.beta;
    j["n_perm_hsic"] = cfg.n_perm_hsic;
    j["n_perm_importance"] = cfg.n_perm_importance;
    j["n_mc_ks"] = cfg.n_mc_ks;
    j["n_trees"] = cfg.forest.n_trees;
    j["mtry"] = cfg.forest.mtry;
    j["min_leaf"] = cfg.forest.min_leaf;
    j["cv"] = cfg.forest.cv == learn::ForestConfig::Cv::LeaveOneOut ? "loo" : "kfold";
    j["k_folds"] = cfg.forest.k_folds;
    j["smoothing"] = stats::to_string(cfg.smoothing);
    j["seed"] = cfg.seed;
    return j;
}

nlohmann::ordered_json decisions_json(const std::vector<FeatureDecision>& ds) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& d : ds) {
        nlohmann::ordered_json j;
        j["feature"] = d.feature;
        j["ks_p"] = d.ks_p.value;
        j["decision"] = to_string(d.decision);
        arr.push_back(std::move(j));
    }
    return arr;
}

nlohmann::ordered_json matrix_json(const RelevanceMatrix& m) {
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& row : m.p) {
        nlohmann::ordered_json r = nlohmann::ordered_json::array();
        for (const auto& pv : row) r.push_back(pv.value);
        rows.push_back(std::move(r));
    }
    return rows;
}

nlohmann::ordered_json statements_json(const std::vector<Statement>& ss) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& s : ss) {
        nlohmann::ordered_json j;
        j["feature"] = s.feature;
        j["rule"] = s.rule;
        j["conclusion"] = s.conclusion;
        j["inconclusive"] = s.inconclusive;
        arr.push_back(std::move(j));
    }
    return arr;
}

void append_matrix_text(std::string& out, const RelevanceMatrix& m,
                        const std::vector<FeatureDecision>& decisions) {
    out += "Subject";
    for (const auto& f : m.features) out += "\t" + f;
    out += "\n";
    for (std::size_t s = 0; s < m.n_subjects(); ++s) {
        out += std::to_string(s + 1);
        for (std::size_t j = 0; j < m.features.size(); ++j) out += "\t" + fmt_p(m.p[s][j].value);
        out += "\n";
    }
    out += "KSp";
    for (const auto& d : decisions) out += "\t" + fmt_p(d.ks_p.value);
    out += "\n";
    out += "decision";
    for (const auto& d : decisions) out += "\t" + to_string(d.decision);
    out += "\n";
}

}  // namespace

std::string CausalReport::to_json() const {
    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    j["paradigm"] = cider::to_string(paradigm);
    j["config"] = config_json(config);
    j["class_labels"] = class_labels;
    j["features"] = partition.features;
    j["n_subjects"] = enc_matrix.n_subjects();

    nlohmann::ordered_json enc;
    enc["p_values"] = matrix_json(enc_matrix);
    enc["group"] = decisions_json(enc_decisions);
    j["encoding"] = std::move(enc);

    nlohmann::ordered_json dec;
    dec["p_values"] = matrix_json(dec_matrix);
    dec["pe_star"] = pe_star;
    if (decoding_group_p) dec["group_wilcoxon_p"] = decoding_group_p->value;
    dec["gate_passed"] = decoding_gate_passed;
    dec["group"] = decisions_json(dec_decisions);
    j["decoding"] = std::move(dec);

    nlohmann::ordered_json part;
    part["enc_dec"] = partition.enc_dec;
    part["enc_only"] = partition.enc_only;
    part["dec_only"] = partition.dec_only;
    part["neither"] = partition.neither;
    part["indeterminate"] = partition.indeterminate;
    j["partition"] = std::move(part);

    j["statements"] = statements_json(statements);
    j["combined"] = statements_json(combined);
    j["warnings"] = warnings;
    j["notes"] = notes;
    return j.dump(2) + "\n";
}

std::string CausalReport::to_text() const {
    std::string out;
    out += "cider causal report (" + cider::to_string(paradigm) + " paradigm)\n";
    out += "seed " + std::to_string(config.seed) + ", alpha " + fmt_p(config.thresholds.alpha) +
           ", beta " + fmt_p(config.thresholds.beta) + ", smoothing " +
           stats::to_string(config.smoothing) + "\n";
    out += "class labels: 0=" + class_labels[0] + " 1=" + class_labels[1] + "\n\n";

    out += "Encoding p-values (condition independent of feature)\n";
    append_matrix_text(out, enc_matrix, enc_decisions);
    out += "\nDecoding p-values (condition independent of feature given the rest)\n";
    append_matrix_text(out, dec_matrix, dec_decisions);

    out += "\nPE*";
    for (double pe : pe_star) out += "\t" + fmt_p(pe);
    out += "\n";
    if (decoding_group_p)
        out += "Wilcoxon vs " + fmt_p(kChanceLevelPercent) + ": p = " + fmt_p(decoding_group_p->value) +
               (decoding_gate_passed ? " (above chance)" : " (not above chance)") + "\n";

    out += "\nPartition\n";
    out += "  X+enc+dec: " + set_text(partition.enc_dec) + "\n";
    out += "  X+enc-dec: " + set_text(partition.enc_only) + "\n";
    out += "  X-enc+dec: " + set_text(partition.dec_only) + "\n";
    out += "  X-enc-dec: " + set_text(partition.neither) + "\n";
    out += "  indeterminate: " + set_text(partition.indeterminate) + "\n";

    out += "\nStatements\n";
    for (const auto& s : statements) {
        out += "  ";
        if (!s.rule.empty()) out += "[" + s.rule + "] ";
        out += s.feature.empty() ? s.conclusion : s.feature + ": " + s.conclusion;
        out += "\n";
    }
    if (!combined.empty()) {
        out += "\nCombined inference\n";
        for (const auto& s : combined) out += "  " + s.conclusion + "\n";
    }
    if (!warnings.empty()) {
        out += "\nWarnings\n";
        for (const auto& w : warnings) out += "  " + w + "\n";
    }
    if (!notes.empty()) {
        out += "\nNotes\n";
        for (const auto& n : notes) out += "  " + n + "\n";
    }
    return out;
}

}  // namespace cider::pipeline
