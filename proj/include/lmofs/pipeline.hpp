#pragma once

// The extract -> score -> sweep -> predict / report pipeline behind the CLI.
// Every stage reads and writes files in one output directory:
//
//   vocabulary.tsv  matrix.bin  labels.tsv          (extract)
//   records.tsv     scores.tsv                       (score)
//   sweep.csv       selected_subset.tsv  model.json  (sweep)
//   results.jsonl                                    (predict)
//   impact.tsv      impact_by_category.csv           (report)

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dataset.hpp"
#include "features.hpp"
#include "lmo.hpp"
#include "resources.hpp"
#include "ridge.hpp"
#include "sparse_matrix.hpp"
#include "sweep.hpp"

namespace lmofs {

struct PipelineConfig {
    std::string train_path;
    std::string truth_path;
    DatasetSchema schema = DatasetSchema::challenge_jsonl;
    std::string resources_dir;
    std::string output_dir;
    std::optional<Seed> seed;

    VocabularyOptions vocabulary;

    std::optional<std::size_t> min_subset_size;
    std::optional<std::size_t> runs;
    double coverage = 25.0;
    double alpha = 1.0;
    double split_fraction = 0.7;
    std::size_t workers = 1;
    double compute_budget = 1e9; ///< limit on n * r * (n - m)
    bool budget_override = false;
    bool keep_going = false;
    bool resume = false;

    std::vector<double> sweep_fractions; ///< empty: default grid
    double sweep_train_fraction = 2.0 / 3.0;
    SubsetRounding subset_rounding = SubsetRounding::floor;

    double impact_threshold = 1e-5;

    // predict
    std::string predict_path;
    DatasetSchema predict_schema = DatasetSchema::challenge_jsonl;
    std::string predict_output;

    LmoConfig lmo() const {
        LmoConfig c;
        c.min_subset_size = min_subset_size;
        c.runs = runs;
        c.coverage = coverage;
        c.alpha = alpha;
        c.master_seed = seed.value_or(0);
        c.split_fraction = split_fraction;
        c.workers = workers;
        return c;
    }

    std::filesystem::path out(const char* name) const { return std::filesystem::path(output_dir) / name; }
};

inline DatasetSchema parse_schema(std::string_view s) {
    if (s == "challenge_jsonl" || s == "challenge") return DatasetSchema::challenge_jsonl;
    if (s == "simple_jsonl" || s == "simple") return DatasetSchema::simple_jsonl;
    throw Error("unknown dataset schema '" + std::string(s) + "'");
}

/// Applies a JSON config object. Unknown keys are an error so typos surface.
inline void apply_config_json(PipelineConfig& c, const nlohmann::json& j) {
    static const std::vector<std::string> known = {
        "train", "truth", "schema", "resources", "output_dir", "seed", "min_ngram_count", "ngram_count_mode",
        "min_subset_size", "runs", "coverage", "alpha", "split_fraction", "workers", "compute_budget",
        "sweep_fractions", "sweep_train_fraction", "subset_rounding", "impact_threshold"};
    for (const auto& [key, value] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) throw Error("unknown config key '" + key + "'");
    }
    try {
        if (j.contains("train")) c.train_path = j["train"].get<std::string>();
        if (j.contains("truth")) c.truth_path = j["truth"].get<std::string>();
        if (j.contains("schema")) c.schema = parse_schema(j["schema"].get<std::string>());
        if (j.contains("resources")) c.resources_dir = j["resources"].get<std::string>();
        if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();
        if (j.contains("seed")) c.seed = j["seed"].get<Seed>();
        if (j.contains("min_ngram_count")) c.vocabulary.min_count = j["min_ngram_count"].get<std::uint64_t>();
        if (j.contains("ngram_count_mode")) {
            const auto m = j["ngram_count_mode"].get<std::string>();
            if (m == "corpus_occurrences") {
                c.vocabulary.count_mode = NgramCountMode::corpus_occurrences;
            } else if (m == "document_frequency") {
                c.vocabulary.count_mode = NgramCountMode::document_frequency;
            } else {
                throw Error("unknown ngram_count_mode '" + m + "'");
            }
        }
        if (j.contains("min_subset_size")) c.min_subset_size = j["min_subset_size"].get<std::size_t>();
        if (j.contains("runs")) c.runs = j["runs"].get<std::size_t>();
        if (j.contains("coverage")) c.coverage = j["coverage"].get<double>();
        if (j.contains("alpha")) c.alpha = j["alpha"].get<double>();
        if (j.contains("split_fraction")) c.split_fraction = j["split_fraction"].get<double>();
        if (j.contains("workers")) c.workers = j["workers"].get<std::size_t>();
        if (j.contains("compute_budget")) c.compute_budget = j["compute_budget"].get<double>();
        if (j.contains("sweep_fractions")) c.sweep_fractions = j["sweep_fractions"].get<std::vector<double>>();
        if (j.contains("sweep_train_fraction")) c.sweep_train_fraction = j["sweep_train_fraction"].get<double>();
        if (j.contains("subset_rounding")) {
            const auto r = j["subset_rounding"].get<std::string>();
            if (r != "floor" && r != "ceil") throw Error("subset_rounding must be floor or ceil");
            c.subset_rounding = r == "floor" ? SubsetRounding::floor : SubsetRounding::ceil;
        }
        if (j.contains("impact_threshold")) c.impact_threshold = j["impact_threshold"].get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("config: ") + e.what());
    }
}

inline void load_config_file(PipelineConfig& c, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("config '" + path + "': " + e.what());
    }
    apply_config_json(c, j);
}

/// LMOFS_SEED, LMOFS_WORKERS, LMOFS_OUTPUT_DIR, LMOFS_RESOURCES.
inline void apply_environment(PipelineConfig& c) {
    if (const char* v = std::getenv("LMOFS_SEED"); v && *v) c.seed = std::stoull(v);
    if (const char* v = std::getenv("LMOFS_WORKERS"); v && *v) c.workers = std::stoull(v);
    if (const char* v = std::getenv("LMOFS_OUTPUT_DIR"); v && *v) c.output_dir = v;
    if (const char* v = std::getenv("LMOFS_RESOURCES"); v && *v) c.resources_dir = v;
}

namespace detail {

inline void require(bool ok, const std::string& message) {
    if (!ok) throw Error(message);
}

inline void require_seed(const PipelineConfig& c) {
    require(c.seed.has_value(), "no seed configured; pass --seed, set LMOFS_SEED, or add \"seed\" to the config");
}

inline void require_output_dir(const PipelineConfig& c) {
    require(!c.output_dir.empty(), "no output directory configured");
}

inline void require_file(const std::filesystem::path& p, const std::string& hint) {
    require(std::filesystem::is_regular_file(p), "missing " + p.string() + " (" + hint + ")");
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error("cannot open " + p.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Writes through a temporary file and renames it into place.
inline void write_file(const std::filesystem::path& p, const std::string& bytes) {
    const auto tmp = p.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp);
        out << bytes;
        if (!out) throw Error("failed writing " + tmp);
    }
    std::filesystem::rename(tmp, p);
}

inline std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::vector<double> read_labels(const std::filesystem::path& p) {
    std::istringstream in(read_file(p));
    std::string line;
    std::vector<double> y;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#' || line.rfind("id\t", 0) == 0) continue;
        const auto f = split_tabs(line);
        if (f.size() != 2) throw ParseError("bad label row in " + p.string());
        y.push_back(std::stod(f[1]));
    }
    return y;
}

struct Workspace {
    FeatureVocabulary vocab;
    SparseMatrix x;
    std::vector<double> y;
};

inline Workspace load_workspace(const PipelineConfig& c) {
    for (const char* f : {"vocabulary.tsv", "matrix.bin", "labels.tsv"}) require_file(c.out(f), "run `extract` first");
    Workspace ws;
    std::istringstream vin(read_file(c.out("vocabulary.tsv")));
    ws.vocab = read_vocabulary(vin);
    std::istringstream min(read_file(c.out("matrix.bin")));
    auto [x, hash] = SparseMatrix::read_binary(min);
    require(hash == ws.vocab.hash(), "matrix cache was built against a different vocabulary");
    require(x.cols() == ws.vocab.size(), "matrix column count does not match the vocabulary");
    ws.x = std::move(x);
    ws.y = read_labels(c.out("labels.tsv"));
    require(ws.y.size() == ws.x.rows(), "labels.tsv does not match the matrix row count");
    return ws;
}

} // namespace detail

/// Advisory lock on an output directory, held for the lifetime of the object.
class OutputLock {
public:
    explicit OutputLock(const std::filesystem::path& dir) : path_(dir / ".lmofs.lock") {
        std::filesystem::create_directories(dir);
        std::FILE* f = std::fopen(path_.c_str(), "wx");
        if (!f) {
            throw Error("output directory " + dir.string() + " is locked by another command (remove " +
                        path_.string() + " if stale)");
        }
        std::fclose(f);
    }
    ~OutputLock() {
        std::error_code ec;
        std::filesystem::remove(path_, ec);
    }
    OutputLock(const OutputLock&) = delete;
    OutputLock& operator=(const OutputLock&) = delete;

private:
    std::filesystem::path path_;
};

/// Builds the vocabulary from the training corpus and caches the matrix and labels.
inline void cmd_extract(const PipelineConfig& c, std::ostream& log) {
    detail::require_output_dir(c);
    detail::require(!c.train_path.empty(), "no training corpus configured");
    detail::require(!c.resources_dir.empty(), "no resources directory configured");
    const auto resources = load_resources(c.resources_dir);
    const auto train = load_dataset(c.train_path, c.schema, c.truth_path);
    detail::require(!train.empty(), "training corpus is empty");
    const auto y = train.labels();

    OutputLock lock(c.output_dir);
    const auto vocab = build_vocabulary(train, resources.word_lists, c.vocabulary);
    const auto x = extract_matrix(train, vocab, resources);

    std::ostringstream vocab_bytes, matrix_bytes, label_bytes;
    write_vocabulary(vocab, vocab_bytes);
    x.write_binary(matrix_bytes, vocab.hash());
    label_bytes << "id\tlabel\n";
    for (std::size_t i = 0; i < train.size(); ++i) label_bytes << train.instances[i].id << '\t' << format_double(y[i]) << '\n';

    const std::uint64_t cache_hash =
        detail::fnv1a(vocab_bytes.str()) ^ (detail::fnv1a(matrix_bytes.str()) * 3) ^ (detail::fnv1a(label_bytes.str()) * 7);
    bool unchanged = true;
    for (const auto& [name, bytes] : {std::pair{"vocabulary.tsv", vocab_bytes.str()},
                                      std::pair{"matrix.bin", matrix_bytes.str()},
                                      std::pair{"labels.tsv", label_bytes.str()}}) {
        const auto p = c.out(name);
        if (std::filesystem::is_regular_file(p) && detail::read_file(p) == bytes) continue;
        unchanged = false;
        detail::write_file(p, bytes);
    }

    log << "instances: " << train.size() << '\n';
    log << "char_ngram: " << vocab.count(FeatureCategory::char_ngram) << '\n';
    log << "word_ngram: " << vocab.count(FeatureCategory::word_ngram) << '\n';
    log << "engineered: " << vocab.count(FeatureCategory::engineered) << '\n';
    log << "wordlist: " << vocab.count(FeatureCategory::wordlist) << '\n';
    log << "total features: " << vocab.size() << '\n';
    log << "nonzeros: " << x.nnz() << '\n';
    log << "cache hash: " << hash_hex(cache_hash) << (unchanged ? " (unchanged)" : "") << '\n';
}

/// Runs the leave-many-out job and writes records.tsv and scores.tsv.
inline LmoResult cmd_score(const PipelineConfig& c, std::ostream& log) {
    detail::require_output_dir(c);
    detail::require_seed(c);
    const auto ws = detail::load_workspace(c);
    const auto cfg = c.lmo();
    const auto shape = resolve_shape(cfg, ws.x.cols());
    if (shape.compute_units() > c.compute_budget && !c.budget_override) {
        char buf[256];
        std::snprintf(buf, sizeof buf,
                      "job needs n*r*(n-m) = %.3g compute units (n=%zu, m=%zu, r=%zu), above the budget of %.3g; "
                      "pass --budget-override to run it anyway",
                      shape.compute_units(), shape.n, shape.m, shape.r, c.compute_budget);
        throw Error(buf);
    }

    OutputLock lock(c.output_dir);
    const auto spill_path = c.out("records.tsv");
    const auto header = spill_header(shape, *c.seed);
    LmoOptions opts;
    opts.keep_going = c.keep_going;
    if (c.resume && std::filesystem::is_regular_file(spill_path)) {
        std::istringstream in(detail::read_file(spill_path));
        opts.completed = read_complete_runs(in, shape, *c.seed);
    }
    {
        // Rewrite the recovered prefix so a torn tail is discarded.
        std::ofstream out(spill_path, std::ios::trunc);
        if (!out) throw Error("cannot write " + spill_path.string());
        out << header << '\n';
        for (const auto& [run, recs] : opts.completed) write_records(out, recs);
    }
    std::ofstream spill(spill_path, std::ios::app);
    opts.on_run_complete = [&spill](const RunResult& r) {
        write_records(spill, r.records);
        spill.flush();
    };

    auto result = run_lmo(cfg, ws.x, ws.y, ws.vocab, opts);
    spill.close();

    std::ostringstream table;
    write_score_table(result.table, table,
                      "master_seed=" + std::to_string(*c.seed) + " vocabulary_hash=" + hash_hex(ws.vocab.hash()) +
                          " n=" + std::to_string(shape.n) + " m=" + std::to_string(shape.m) +
                          " r=" + std::to_string(shape.r) + " alpha=" + format_double(c.alpha));
    detail::write_file(c.out("scores.tsv"), table.str());

    log << "n=" << shape.n << " m=" << shape.m << " r=" << shape.r << " removals/run=" << shape.removals_per_run()
        << '\n';
    log << "runs executed: " << result.runs_executed << ", recovered: " << opts.completed.size()
        << ", failed: " << result.failures.size() << '\n';
    for (const auto& f : result.failures) log << "  run " << f.run_id << " failed: " << f.message << '\n';
    char buf[160];
    std::snprintf(buf, sizeof buf, "mean removals per feature: %.2f (target c=%.4g; reference setup: 26)\n",
                  result.table.mean_removal_count(), c.coverage);
    log << buf;
    if (const auto never = result.table.never_removed_count()) {
        log << "warning: " << never << " features were never removed and have no score\n";
    }
    return result;
}

/// Ranks features, evaluates the nested subsets on one split, and stores the
/// best subset and its model.
inline SubsetEvaluation cmd_sweep(const PipelineConfig& c, std::ostream& log) {
    detail::require_output_dir(c);
    detail::require_seed(c);
    const auto ws = detail::load_workspace(c);
    detail::require_file(c.out("scores.tsv"), "run `score` first");
    std::istringstream sin(detail::read_file(c.out("scores.tsv")));
    const auto table = read_score_table(sin);
    detail::require(table.features.size() == ws.vocab.size(), "scores.tsv does not match the vocabulary");

    OutputLock lock(c.output_dir);
    std::vector<std::string> warnings;
    const auto ranked = rank_features(table, &warnings);
    for (const auto& w : warnings) log << "warning: " << w << '\n';

    const auto requested = c.sweep_fractions.empty() ? default_fractions() : c.sweep_fractions;
    const auto fractions =
        c.sweep_fractions.empty() ? feasible_fractions(requested, ranked.size(), c.subset_rounding) : requested;
    if (fractions.size() < requested.size()) {
        log << "note: " << requested.size() - fractions.size() << " grid fractions keep no feature out of "
            << ranked.size() << " and were skipped\n";
    }
    const auto subsets = build_percent_subsets(ranked, fractions, c.subset_rounding);
    const SplitSpec split{c.sweep_train_fraction, derive_seed(*c.seed, SeedStream::sweep_split, 0)};
    const auto evals = evaluate_subsets(subsets, fractions, ws.x, ws.y, split, c.alpha, c.workers);
    const auto best = select_best(evals);

    const std::string provenance = "master_seed=" + std::to_string(*c.seed) +
                                   " split_seed=" + std::to_string(split.seed) +
                                   " vocabulary_hash=" + hash_hex(ws.vocab.hash());
    std::ostringstream sweep_csv, subset_file, model_file;
    write_sweep_csv(evals, sweep_csv, provenance);
    write_selected_subset(best.subset, ws.vocab, subset_file,
                          provenance + " fraction=" + format_double(best.retained_fraction) +
                              " validation_mse=" + format_double(best.validation_mse));
    const auto d = make_split(ws.x, ws.y, split);
    const auto model = fit_ridge(d.x_train, d.y_train, best.subset, c.alpha);
    write_model(model, ws.vocab.hash(), model_file);
    detail::write_file(c.out("sweep.csv"), sweep_csv.str());
    detail::write_file(c.out("selected_subset.tsv"), subset_file.str());
    detail::write_file(c.out("model.json"), model_file.str());

    const auto& full = evals.front();
    char buf[200];
    std::snprintf(buf, sizeof buf, "full set: %zu features, validation MSE %.6f\n", full.subset_size,
                  full.validation_mse);
    log << buf;
    std::snprintf(buf, sizeof buf, "best: %.1f%% (%zu features), validation MSE %.6f\n",
                  100.0 * best.retained_fraction, best.subset_size, best.validation_mse);
    log << buf;
    return best;
}

/// Scores a corpus with the selected model; writes one {"id","clickbaitScore"} per line.
inline std::size_t cmd_predict(const PipelineConfig& c, std::ostream& log) {
    detail::require_output_dir(c);
    detail::require(!c.predict_path.empty(), "no instances file given to predict");
    detail::require(!c.resources_dir.empty(), "no resources directory configured");
    for (const char* f : {"vocabulary.tsv", "model.json", "selected_subset.tsv"}) {
        detail::require_file(c.out(f), "run `extract`, `score` and `sweep` first");
    }
    std::istringstream vin(detail::read_file(c.out("vocabulary.tsv")));
    const auto vocab = read_vocabulary(vin);
    std::istringstream model_in(detail::read_file(c.out("model.json")));
    const auto [model, model_hash] = read_model(model_in);
    detail::require(model_hash == vocab.hash(),
                    "model was trained against vocabulary " + hash_hex(model_hash) + " but extraction uses " +
                        hash_hex(vocab.hash()));
    std::istringstream subset_in(detail::read_file(c.out("selected_subset.tsv")));
    const auto subset = read_selected_subset(subset_in, vocab);
    detail::require(subset == model.active, "model.json and selected_subset.tsv disagree on the retained features");

    const auto resources = load_resources(c.resources_dir);
    const auto ds = load_dataset(c.predict_path, c.predict_schema);
    const auto x = extract_matrix(ds, vocab, resources);
    const auto scores = predict(model, x);

    std::ostringstream out;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        nlohmann::ordered_json j;
        j["id"] = ds.instances[i].id;
        j["clickbaitScore"] = clamp_score(scores[i]);
        out << j.dump() << '\n';
    }
    const std::filesystem::path dest = c.predict_output.empty() ? c.out("results.jsonl") : std::filesystem::path(c.predict_output);
    if (dest.has_parent_path()) std::filesystem::create_directories(dest.parent_path());
    detail::write_file(dest, out.str());
    log << "wrote " << ds.size() << " predictions to " << dest.string() << '\n';
    return ds.size();
}

/// High-impact features per category from scores.tsv.
inline ImpactReport cmd_report(const PipelineConfig& c, std::ostream& log) {
    detail::require_output_dir(c);
    detail::require_file(c.out("scores.tsv"), "run `score` first");
    std::istringstream sin(detail::read_file(c.out("scores.tsv")));
    std::string header;
    std::getline(sin, header);
    sin.seekg(0);
    const auto table = read_score_table(sin);

    OutputLock lock(c.output_dir);
    const auto rep = impact_report(table, c.impact_threshold);
    const std::string provenance = header.size() > 23 ? header.substr(23) : std::string{};
    std::ostringstream tsv, csv;
    write_impact_tsv(rep, tsv, provenance);
    write_impact_plot_csv(rep, csv);
    detail::write_file(c.out("impact.tsv"), tsv.str());
    detail::write_file(c.out("impact_by_category.csv"), csv.str());

    for (const auto& [cat, rows] : rep.by_category) {
        const auto neg = std::count_if(rows.begin(), rows.end(), [](const auto& f) { return *f.lmo_score < 0; });
        log << to_string(cat) << ": " << rows.size() << " high-impact (" << neg << " negative)\n";
    }
    char buf[160];
    std::snprintf(buf, sizeof buf, "features with negative score: %.1f%% of %zu scored\n",
                  100.0 * rep.negative_fraction(), rep.scored_features);
    log << buf;
    return rep;
}

} // namespace lmofs
