#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "cider/io.hpp"
#include "cider/pipeline.hpp"

namespace fs = std::filesystem;
using namespace cider;

namespace {

// Aligns a dataset's label mapping with a reference mapping when the label
// sets agree but first occurrence ordered them differently.
void align_labels(synth::Dataset& data, const std::array<std::string, 2>& reference) {
    if (data.class_labels == reference) return;
    if (data.class_labels[0] == reference[1] && data.class_labels[1] == reference[0]) {
        for (auto& c : data.condition) c = c ? 0 : 1;
        data.class_labels = reference;
    }
}

int cmd_analyze(const std::string& config_path, const std::vector<std::string>& subject_paths) {
    const io::RunConfig cfg = io::load_run_config(config_path);

    std::vector<synth::Dataset> cohort;
    cohort.reserve(subject_paths.size());
    for (const auto& path : subject_paths) {
        cohort.push_back(io::read_dataset_csv(path));
        if (cohort.size() > 1) {
            align_labels(cohort.back(), cohort.front().class_labels);
            if (cohort.back().feature_names != cohort.front().feature_names ||
                cohort.back().class_labels != cohort.front().class_labels)
                throw InputError("schema mismatch between '" + subject_paths.front() + "' and '" +
                                 path + "'");
        }
        std::cerr << "loaded " << path << " (" << cohort.back().rows() << " trials, "
                  << cohort.back().cols() << " features)\n";
    }

    std::cerr << "running analysis over " << cohort.size() << " subject(s)...\n";
    const pipeline::CausalReport report = pipeline::run_analysis(cohort, cfg.analysis);

    std::ofstream json_out(cfg.out_json);
    if (!json_out) throw InputError("cannot write '" + cfg.out_json + "'");
    json_out << report.to_json();
    std::ofstream text_out(cfg.out_text);
    if (!text_out) throw InputError("cannot write '" + cfg.out_text + "'");
    text_out << report.to_text();
    std::cerr << "wrote " << cfg.out_json << " and " << cfg.out_text << "\n";
    return 0;
}

int cmd_simulate(const std::string& fixture_path, std::size_t n_subjects, std::size_t n_samples,
                 std::uint64_t seed, const std::string& out_dir) {
    const synth::Sem sem = io::load_sem_file(fixture_path);
    fs::create_directories(out_dir);

    const auto cohort = synth::subject_cohort(sem, n_subjects, n_samples, seed);
    for (std::size_t s = 0; s < cohort.size(); ++s) {
        char name[32];
        std::snprintf(name, sizeof(name), "subject_%02zu.csv", s + 1);
        io::write_dataset_csv(cohort[s], fs::path(out_dir) / name);
    }
    std::cerr << "wrote " << cohort.size() << " subject file(s) to " << out_dir << "\n";

    const auto oracle =
        graph::oracle_relevance(sem.dag, sem.condition, cohort.front().feature_names);
    std::cout << "ground-truth relevance (condition " << sem.condition << ")\n";
    std::cout << "feature\tencoding\tdecoding\n";
    for (const auto& r : oracle)
        std::cout << r.feature << "\t" << (r.encoding_relevant ? "relevant" : "irrelevant") << "\t"
                  << (r.decoding_relevant ? "relevant" : "irrelevant") << "\n";
    return 0;
}

int cmd_dsep(const std::string& dag_path, const std::string& a, const std::string& b,
             const std::vector<std::string>& given) {
    const graph::Dag dag = io::load_dag_file(dag_path);
    const bool separated = graph::is_d_separated(dag, a, b, given);

    std::string zset = "{";
    for (std::size_t i = 0; i < given.size(); ++i) zset += (i ? ", " : "") + given[i];
    zset += "}";

    if (separated) {
        std::cout << "d-separated\n";
        std::cout << "implies (CMC): " << a << " independent of " << b << " given " << zset << "\n";
    } else {
        std::cout << "d-connected\n";
        std::cout << "implies (faithfulness): " << a << " dependent on " << b << " given " << zset
                  << "\n";
    }
    return 0;
}

int cmd_replay(const std::string& matrix_path, const std::string& side, double alpha, double beta,
               std::size_t n_mc, std::uint64_t seed) {
    const io::PValueMatrix matrix = io::read_pvalue_matrix_csv(matrix_path);

    pipeline::RelevanceMatrix m;
    m.side = side == "dec" ? pipeline::RelevanceMatrix::Side::Decoding
                           : pipeline::RelevanceMatrix::Side::Encoding;
    m.features = matrix.features;
    for (const auto& row : matrix.rows) {
        std::vector<stats::PValue> prow;
        prow.reserve(row.size());
        for (double v : row) prow.push_back({v, 0, stats::Smoothing::Raw});
        m.p.push_back(std::move(prow));
    }

    pipeline::Thresholds t{alpha, beta};
    const auto decisions = pipeline::group_aggregate(m, t, n_mc, seed);

    std::cout << "feature\tKSp\tdecision\n";
    for (const auto& d : decisions) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.4g", d.ks_p.value);
        std::cout << d.feature << "\t" << buf << "\t" << pipeline::to_string(d.decision) << "\n";
    }
    auto list_of = [&](pipeline::Relevance r) {
        std::string out = "{";
        bool first = true;
        for (const auto& d : decisions) {
            if (d.decision != r) continue;
            if (!first) out += ", ";
            out += d.feature;
            first = false;
        }
        return out + "}";
    };
    std::cout << "relevant: " << list_of(pipeline::Relevance::Relevant) << "\n";
    std::cout << "irrelevant: " << list_of(pipeline::Relevance::Irrelevant) << "\n";
    std::cout << "indeterminate: " << list_of(pipeline::Relevance::Indeterminate) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cider: rule-tagged causal statements from encoding/decoding feature relevance"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> subject_paths;
    auto* analyze = app.add_subcommand("analyze", "full encoding/decoding causal analysis");
    analyze->add_option("config", config_path, "run configuration file")->required();
    analyze->add_option("subjects", subject_paths, "per-subject CSV files")->required();

    std::string fixture_path, out_dir = "cohort";
    std::size_t n_subjects = 17, n_samples = 470;
    std::uint64_t sim_seed = 1;
    auto* simulate = app.add_subcommand("simulate", "sample a synthetic cohort from a SEM fixture");
    simulate->add_option("fixture", fixture_path, "SEM fixture file")->required();
    simulate->add_option("--subjects", n_subjects, "number of subjects");
    simulate->add_option("--samples", n_samples, "trials per subject");
    simulate->add_option("--seed", sim_seed, "base seed");
    simulate->add_option("--out-dir", out_dir, "output directory for subject CSVs");

    std::string dag_path, node_a, node_b;
    std::vector<std::string> given;
    auto* dsep = app.add_subcommand("dsep", "d-separation query on a DAG file");
    dsep->add_option("dag", dag_path, "DAG text file")->required();
    dsep->add_option("a", node_a, "first node")->required();
    dsep->add_option("b", node_b, "second node")->required();
    dsep->add_option("given", given, "conditioning nodes");

    std::string matrix_path, side = "enc";
    double alpha = 0.05, beta = 0.10;
    std::size_t n_mc = 100000;
    std::uint64_t replay_seed = 1;
    auto* replay = app.add_subcommand("replay", "group aggregation on a published p-value matrix");
    replay->add_option("matrix", matrix_path, "subjects x features p-value CSV")->required();
    replay->add_option("--side", side, "matrix side tag: enc or dec")
        ->check(CLI::IsMember({"enc", "dec"}));
    replay->add_option("--alpha", alpha, "relevance threshold");
    replay->add_option("--beta", beta, "irrelevance threshold");
    replay->add_option("--draws", n_mc, "Monte-Carlo draws for the KS null");
    replay->add_option("--seed", replay_seed, "base seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        app.exit(e);
        return 2;
    }

    try {
        if (*analyze) return cmd_analyze(config_path, subject_paths);
        if (*simulate) return cmd_simulate(fixture_path, n_subjects, n_samples, sim_seed, out_dir);
        if (*dsep) return cmd_dsep(dag_path, node_a, node_b, given);
        if (*replay) return cmd_replay(matrix_path, side, alpha, beta, n_mc, replay_seed);
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
