#include "cider/io.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace cider::io {

namespace {

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == sep) {
            out.push_back(trim(s.substr(start, i - start)));
            start = i + 1;
        }
    }
    return out;
}

[[noreturn]] void fail(const std::string& source, std::size_t line, const std::string& msg) {
    throw InputError(source + ":" + std::to_string(line) + ": " + msg);
}

double parse_double(const std::string& s, const std::string& source, std::size_t line,
                    const std::string& what) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size() || !std::isfinite(v))
            fail(source, line, "invalid " + what + " '" + s + "'");
        return v;
    } catch (const InputError&) {
        throw;
    } catch (const std::exception&) {
        fail(source, line, "invalid " + what + " '" + s + "'");
    }
}

std::uint64_t parse_count(const std::string& s, const std::string& source, std::size_t line,
                          const std::string& what) {
    std::uint64_t v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        fail(source, line, "invalid " + what + " '" + s + "'");
    return v;
}

std::ifstream open_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open '" + path.string() + "'");
    return in;
}

// Shared line-scanner for the DAG and SEM formats. Mechanism lines are
// collected for a second pass once the graph is complete.
struct FixtureLines {
    graph::Dag dag;
    std::vector<std::pair<std::size_t, std::string>> mech_lines;
    std::string condition;
    std::string paradigm;
};

FixtureLines scan_fixture(std::istream& in, const std::string& source, bool allow_sem_keys) {
    FixtureLines out;
    std::string raw;
    std::size_t lineno = 0;
    std::vector<std::pair<std::size_t, std::string>> hidden_names;
    while (std::getline(in, raw)) {
        ++lineno;
        const auto hash = raw.find('#');
        std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) continue;

        if (line.rfind("hidden:", 0) == 0) {
            for (const auto& name : split(line.substr(7), ',')) {
                if (name.empty()) fail(source, lineno, "empty name in hidden list");
                hidden_names.emplace_back(lineno, name);
            }
            continue;
        }
        if (line.rfind("mech:", 0) == 0) {
            if (!allow_sem_keys) fail(source, lineno, "mechanism line in plain DAG file");
            out.mech_lines.emplace_back(lineno, trim(line.substr(5)));
            continue;
        }
        if (line.rfind("condition:", 0) == 0) {
            if (!allow_sem_keys) fail(source, lineno, "condition line in plain DAG file");
            out.condition = trim(line.substr(10));
            continue;
        }
        if (line.rfind("paradigm:", 0) == 0) {
            if (!allow_sem_keys) fail(source, lineno, "paradigm line in plain DAG file");
            out.paradigm = trim(line.substr(9));
            continue;
        }

        const auto arrow = line.find("->");
        try {
            if (arrow == std::string::npos) {
                if (line.find_first_of(" \t") != std::string::npos)
                    fail(source, lineno, "expected 'tail -> head' or a bare node name");
                out.dag.add_node(line);
            } else {
                const std::string tail = trim(line.substr(0, arrow));
                const std::string head = trim(line.substr(arrow + 2));
                if (tail.empty() || head.empty())
                    fail(source, lineno, "expected 'tail -> head'");
                out.dag.add_edge(tail, head);
            }
        } catch (const std::invalid_argument& e) {
            fail(source, lineno, e.what());
        }
    }
    for (const auto& [ln, name] : hidden_names) {
        if (!out.dag.contains(name)) fail(source, ln, "hidden node '" + name + "' never declared");
        out.dag.mark_hidden(name);
    }
    return out;
}

// `linear(S:0.8, H:-0.5; sd=1.0)` -> kind, weight list, params.
struct MechText {
    std::string kind;
    std::vector<std::pair<std::string, double>> weights;
    std::map<std::string, double> params;
};

MechText parse_mech_body(const std::string& body, const std::string& source, std::size_t line) {
    const auto open = body.find('(');
    if (open == std::string::npos || body.back() != ')')
        fail(source, line, "expected mechanism like 'linear(parent:w; sd=1.0)'");
    MechText out;
    out.kind = trim(body.substr(0, open));
    const std::string inner = body.substr(open + 1, body.size() - open - 2);

    for (const auto& part : split(inner, ';')) {
        if (part.empty()) continue;
        for (const auto& item : split(part, ',')) {
            if (item.empty()) continue;
            const auto eq = item.find('=');
            const auto colon = item.find(':');
            if (eq != std::string::npos) {
                out.params[trim(item.substr(0, eq))] =
                    parse_double(trim(item.substr(eq + 1)), source, line, "parameter");
            } else if (colon != std::string::npos) {
                out.weights.emplace_back(
                    trim(item.substr(0, colon)),
                    parse_double(trim(item.substr(colon + 1)), source, line, "weight"));
            } else {
                fail(source, line, "expected 'parent:weight' or 'name=value', got '" + item + "'");
            }
        }
    }
    return out;
}

synth::Mechanism build_mechanism(const MechText& m, const std::string& source, std::size_t line) {
    std::map<std::string, double> weights;
    for (const auto& [name, w] : m.weights) {
        if (!weights.emplace(name, w).second)
            fail(source, line, "duplicate weight for parent '" + name + "'");
    }
    auto param = [&](const std::string& key, double fallback, bool required) {
        auto it = m.params.find(key);
        if (it != m.params.end()) return it->second;
        if (required) fail(source, line, "mechanism missing parameter '" + key + "'");
        return fallback;
    };
    auto check_params = [&](std::initializer_list<std::string> allowed) {
        for (const auto& [k, v] : m.params) {
            (void)v;
            bool ok = false;
            for (const auto& a : allowed) ok = ok || a == k;
            if (!ok) fail(source, line, "unknown mechanism parameter '" + k + "'");
        }
    };

    if (m.kind == "linear") {
        check_params({"sd"});
        return synth::LinearGaussian{std::move(weights), param("sd", 1.0, false)};
    }
    if (m.kind == "quadratic") {
        check_params({"sd"});
        return synth::Quadratic{std::move(weights), param("sd", 1.0, false)};
    }
    if (m.kind == "bernoulli") {
        check_params({"p"});
        if (!weights.empty()) fail(source, line, "bernoulli takes no parent weights");
        return synth::BernoulliRoot{param("p", 0.5, true)};
    }
    if (m.kind == "logistic") {
        check_params({"bias"});
        return synth::LogisticSink{std::move(weights), param("bias", 0.0, false)};
    }
    fail(source, line, "unknown mechanism kind '" + m.kind + "'");
}

}  // namespace

graph::Dag parse_dag_text(std::istream& in, const std::string& source_name) {
    auto scanned = scan_fixture(in, source_name, false);
    if (scanned.dag.size() == 0) throw InputError(source_name + ": no nodes declared");
    return std::move(scanned.dag);
}

graph::Dag load_dag_file(const std::filesystem::path& path) {
    auto in = open_file(path);
    return parse_dag_text(in, path.string());
}

synth::Sem parse_sem_text(std::istream& in, const std::string& source_name) {
    auto scanned = scan_fixture(in, source_name, true);
    if (scanned.dag.size() == 0) throw InputError(source_name + ": no nodes declared");
    if (scanned.condition.empty())
        throw InputError(source_name + ": missing 'condition:' line");

    synth::Sem sem;
    sem.dag = std::move(scanned.dag);
    sem.condition = scanned.condition;
    sem.paradigm =
        scanned.paradigm.empty() ? Paradigm::Stimulus : parse_paradigm(scanned.paradigm);

    for (const auto& [line, text] : scanned.mech_lines) {
        const auto eq = text.find('=');
        if (eq == std::string::npos) fail(source_name, line, "expected 'mech: node = kind(...)'");
        const std::string node = trim(text.substr(0, eq));
        if (!sem.dag.contains(node)) fail(source_name, line, "unknown node '" + node + "'");
        if (sem.mechanisms.count(node)) fail(source_name, line, "duplicate mechanism for '" + node + "'");
        const MechText m = parse_mech_body(trim(text.substr(eq + 1)), source_name, line);
        sem.mechanisms[node] = build_mechanism(m, source_name, line);
    }
    try {
        sem.validate();
    } catch (const std::invalid_argument& e) {
        throw InputError(source_name + ": " + e.what());
    }
    return sem;
}

synth::Sem load_sem_file(const std::filesystem::path& path) {
    auto in = open_file(path);
    return parse_sem_text(in, path.string());
}

synth::Dataset read_dataset_csv(const std::filesystem::path& path) {
    auto in = open_file(path);
    const std::string source = path.string();
    std::string raw;
    std::size_t lineno = 0;

    if (!std::getline(in, raw)) throw InputError(source + ": empty file");
    ++lineno;
    auto header = split(raw, ',');
    if (header.empty() || header[0] != "condition")
        fail(source, lineno, "first column must be named 'condition'");

    synth::Dataset data;
    data.feature_names.assign(header.begin() + 1, header.end());
    for (const auto& f : data.feature_names)
        if (f.empty()) fail(source, lineno, "empty feature name in header");

    std::vector<std::string> seen_labels;
    while (std::getline(in, raw)) {
        ++lineno;
        if (trim(raw).empty()) continue;
        const auto cells = split(raw, ',');
        if (cells.size() != header.size())
            fail(source, lineno,
                 "expected " + std::to_string(header.size()) + " cells, got " +
                     std::to_string(cells.size()));

        const std::string& label = cells[0];
        auto it = std::find(seen_labels.begin(), seen_labels.end(), label);
        if (it == seen_labels.end()) {
            if (seen_labels.size() == 2)
                fail(source, lineno, "third condition label '" + label + "' (binary expected)");
            seen_labels.push_back(label);
            it = std::prev(seen_labels.end());
        }
        data.condition.push_back(static_cast<std::uint8_t>(it - seen_labels.begin()));

        for (std::size_t c = 1; c < cells.size(); ++c) {
            try {
                std::size_t used = 0;
                const double v = std::stod(cells[c], &used);
                if (used != cells[c].size() || !std::isfinite(v))
                    throw std::invalid_argument("bad cell");
                data.features.push_back(v);
            } catch (const std::exception&) {
                fail(source, lineno,
                     "column " + std::to_string(c + 1) + ": non-numeric cell '" + cells[c] + "'");
            }
        }
    }
    if (seen_labels.size() == 1)
        throw InputError(source + ": condition column has a single class '" + seen_labels[0] + "'");
    if (data.condition.empty()) throw InputError(source + ": no data rows");
    data.class_labels = {seen_labels[0], seen_labels.size() > 1 ? seen_labels[1] : seen_labels[0]};
    try {
        data.validate();
    } catch (const std::invalid_argument& e) {
        throw InputError(source + ": " + e.what());
    }
    return data;
}

void write_dataset_csv(const synth::Dataset& data, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write '" + path.string() + "'");
    out << "condition";
    for (const auto& f : data.feature_names) out << "," << f;
    out << "\n";
    char buf[40];
    for (std::size_t r = 0; r < data.rows(); ++r) {
        out << data.class_labels[data.condition[r]];
        for (std::size_t c = 0; c < data.cols(); ++c) {
            std::snprintf(buf, sizeof(buf), "%.17g", data.at(r, c));
            out << "," << buf;
        }
        out << "\n";
    }
    if (!out) throw InputError("write failed for '" + path.string() + "'");
}

PValueMatrix read_pvalue_matrix_csv(const std::filesystem::path& path) {
    auto in = open_file(path);
    const std::string source = path.string();
    std::string raw;
    std::size_t lineno = 0;

    if (!std::getline(in, raw)) throw InputError(source + ": empty file");
    ++lineno;
    auto header = split(raw, ',');
    std::size_t first_col = 0;
    if (!header.empty()) {
        std::string h0 = header[0];
        for (auto& ch : h0) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
        if (h0 == "subject") first_col = 1;
    }
    PValueMatrix m;
    m.features.assign(header.begin() + static_cast<std::ptrdiff_t>(first_col), header.end());
    if (m.features.empty()) fail(source, lineno, "no feature columns in header");

    while (std::getline(in, raw)) {
        ++lineno;
        if (trim(raw).empty()) continue;
        const auto cells = split(raw, ',');
        if (cells.size() != header.size())
            fail(source, lineno,
                 "expected " + std::to_string(header.size()) + " cells, got " +
                     std::to_string(cells.size()));
        std::vector<double> row;
        row.reserve(m.features.size());
        for (std::size_t c = first_col; c < cells.size(); ++c) {
            const double v = parse_double(cells[c], source, lineno, "p-value");
            if (v < 0.0 || v > 1.0)
                fail(source, lineno, "column " + std::to_string(c + 1) + ": p-value " + cells[c] +
                                         " outside [0,1]");
            row.push_back(v);
        }
        m.rows.push_back(std::move(row));
    }
    if (m.rows.empty()) throw InputError(source + ": no data rows");
    return m;
}

RunConfig parse_run_config(std::istream& in, const std::string& source_name) {
    RunConfig cfg;
    std::string raw;
    std::size_t lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        const auto hash = raw.find('#');
        const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) fail(source_name, lineno, "expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (value.empty()) fail(source_name, lineno, "empty value for '" + key + "'");

        auto& a = cfg.analysis;
        try {
            if (key == "paradigm") {
                a.paradigm = parse_paradigm(value);
            } else if (key == "alpha") {
                a.thresholds.alpha = parse_double(value, source_name, lineno, "alpha");
            } else if (key == "beta") {
                a.thresholds.beta = parse_double(value, source_name, lineno, "beta");
            } else if (key == "n_perm_hsic") {
                a.n_perm_hsic = parse_count(value, source_name, lineno, key);
            } else if (key == "n_perm_importance") {
                a.n_perm_importance = parse_count(value, source_name, lineno, key);
            } else if (key == "n_mc_ks") {
                a.n_mc_ks = parse_count(value, source_name, lineno, key);
            } else if (key == "n_trees") {
                a.forest.n_trees = parse_count(value, source_name, lineno, key);
            } else if (key == "mtry") {
                a.forest.mtry = parse_count(value, source_name, lineno, key);
            } else if (key == "min_leaf") {
                a.forest.min_leaf = parse_count(value, source_name, lineno, key);
            } else if (key == "cv") {
                if (value == "loo")
                    a.forest.cv = learn::ForestConfig::Cv::LeaveOneOut;
                else if (value == "kfold")
                    a.forest.cv = learn::ForestConfig::Cv::KFold;
                else
                    fail(source_name, lineno, "cv must be 'loo' or 'kfold'");
            } else if (key == "k_folds") {
                a.forest.k_folds = parse_count(value, source_name, lineno, key);
            } else if (key == "seed") {
                a.seed = parse_count(value, source_name, lineno, key);
            } else if (key == "smoothing") {
                a.smoothing = stats::parse_smoothing(value);
            } else if (key == "out_json") {
                cfg.out_json = value;
            } else if (key == "out_text") {
                cfg.out_text = value;
            } else {
                fail(source_name, lineno, "unknown configuration key '" + key + "'");
            }
        } catch (const InputError&) {
            throw;
        } catch (const std::exception& e) {
            fail(source_name, lineno, e.what());
        }
    }
    try {
        cfg.analysis.validate();
    } catch (const std::invalid_argument& e) {
        throw InputError(source_name + ": " + e.what());
    }
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    auto in = open_file(path);
    return parse_run_config(in, path.string());
}

}  // namespace cider::io
