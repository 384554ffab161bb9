#pragma once

#include <filesystem>
#include <istream>
#include <string>
#include <vector>

#include "cider/graph.hpp"
#include "cider/pipeline.hpp"
#include "cider/synth.hpp"

namespace cider::io {

// DAG text format: one edge per line `tail -> head`; a bare name declares an
// isolated node; `hidden: a, b` flags nodes unobservable; blank lines and
// `#` comments are ignored.
graph::Dag parse_dag_text(std::istream& in, const std::string& source_name);
graph::Dag load_dag_file(const std::filesystem::path& path);

// SEM fixture format: the DAG format plus
//   condition: <node>
//   paradigm: stimulus | response
//   mech: <node> = linear(parent:w, ...; sd=1.0)
//   mech: <node> = quadratic(parent:w, ...; sd=1.0)
//   mech: <node> = bernoulli(p=0.5)
//   mech: <node> = logistic(parent:w, ...; bias=0.0)
synth::Sem parse_sem_text(std::istream& in, const std::string& source_name);
synth::Sem load_sem_file(const std::filesystem::path& path);

// Dataset CSV: header `condition,<feat>,...`; condition labels are 0/1 or two
// distinct strings mapped by first occurrence; all feature cells finite reals.
// Parse errors name the file, line, and column.
synth::Dataset read_dataset_csv(const std::filesystem::path& path);
void write_dataset_csv(const synth::Dataset& data, const std::filesystem::path& path);

// Rectangular p-value matrix (subjects x features) for replaying published
// group aggregations; an optional leading `subject` column is skipped.
struct PValueMatrix {
    std::vector<std::string> features;
    std::vector<std::vector<double>> rows;
};

PValueMatrix read_pvalue_matrix_csv(const std::filesystem::path& path);

// Flat key-value run configuration; unknown keys are errors.
struct RunConfig {
    pipeline::AnalysisConfig analysis;
    std::string out_json = "report.json";
    std::string out_text = "report.txt";
};

RunConfig parse_run_config(std::istream& in, const std::string& source_name);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace cider::io
