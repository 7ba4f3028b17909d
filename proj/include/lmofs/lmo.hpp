#pragma once

// Leave-many-out feature scoring.
//
// A run starts from the full feature set, removes features one at a time in a
// random order down to m remaining, and records for each removal the change in
// validation MSE (MSE without the feature minus MSE with it). Each run uses its
// own random train/validation split, fixed for the whole run. A feature's score
// is the mean of all deltas recorded for it across r runs.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <functional>
#include <istream>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "error.hpp"
#include "features.hpp"
#include "random.hpp"
#include "ridge.hpp"
#include "sparse_matrix.hpp"
#include "worker_pool.hpp"

namespace lmofs {

struct LmoConfig {
    std::optional<std::size_t> min_subset_size; ///< m
    std::optional<std::size_t> runs;            ///< r
    double coverage = 25.0;                     ///< c = r (n - m) / n
    /// Removals per run when both m and r are unset (capped at n - 1).
    std::size_t default_removals_per_run = 1000;
    double alpha = 1.0;
    Seed master_seed = 0;
    double split_fraction = 0.7;
    std::size_t workers = 1;
    SolverOptions solver;
};

/// The resolved (n, m, r) of a job.
struct LmoShape {
    std::size_t n = 0;
    std::size_t m = 0;
    std::size_t r = 0;

    std::size_t removals_per_run() const { return n - m; }
    double expected_coverage() const {
        return static_cast<double>(r) * static_cast<double>(n - m) / static_cast<double>(n);
    }
    /// n * r * (n - m): proportional to the flops of a sparse job.
    double compute_units() const {
        return static_cast<double>(n) * static_cast<double>(r) * static_cast<double>(n - m);
    }
};

/// Fills whichever of m and r is unset from r (n - m) / n = coverage.
/// With both unset, removals per run default to min(1000, n - 1).
inline LmoShape resolve_shape(const LmoConfig& cfg, std::size_t n) {
    if (n < 2) throw Error("leave-many-out needs at least two features");
    if (!(cfg.coverage > 0.0)) throw Error("coverage target must be positive");
    LmoShape s;
    s.n = n;
    auto runs_for = [&](std::size_t removals) {
        const double exact = cfg.coverage * static_cast<double>(n) / static_cast<double>(removals);
        return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(exact - 1e-9)));
    };
    if (cfg.min_subset_size && cfg.runs) {
        s.m = *cfg.min_subset_size;
        s.r = *cfg.runs;
    } else if (cfg.min_subset_size) {
        s.m = *cfg.min_subset_size;
        if (s.m >= n) throw Error("minimum subset size must be below the feature count");
        s.r = runs_for(n - s.m);
    } else if (cfg.runs) {
        s.r = *cfg.runs;
        if (s.r == 0) throw Error("run count must be at least 1");
        const double exact = cfg.coverage * static_cast<double>(n) / static_cast<double>(s.r);
        const auto removals = std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(exact)), 1, n - 1);
        s.m = n - removals;
    } else {
        const auto removals = std::clamp<std::size_t>(cfg.default_removals_per_run, 1, n - 1);
        s.m = n - removals;
        s.r = runs_for(removals);
    }
    if (s.m < 1 || s.m >= n) throw Error("minimum subset size must satisfy 1 <= m < n");
    if (s.r < 1) throw Error("run count must be at least 1");
    return s;
}

struct RunSpec {
    std::size_t run_id = 0;
    std::vector<ColumnId> removal_sequence; ///< length n - m, distinct
    Seed split_seed = 0;

    friend bool operator==(const RunSpec&, const RunSpec&) = default;
};

struct RemovalRecord {
    std::size_t run_id = 0;
    std::size_t step = 0; ///< 0-based position within the run
    ColumnId feature = 0;
    double delta = 0.0;   ///< MSE(subset without feature) - MSE(subset with feature)

    friend bool operator==(const RemovalRecord&, const RemovalRecord&) = default;
};

struct RunResult {
    std::size_t run_id = 0;
    double initial_mse = 0.0;
    double final_mse = 0.0;
    std::vector<RemovalRecord> records;
};

/// Per-run removal orders and split seeds, derived from the master seed only:
/// removal order from derive_seed(master, removal_order, run_id), split from
/// derive_seed(master, run_split, run_id).
inline std::vector<RunSpec> plan_runs(const LmoShape& shape, Seed master_seed) {
    if (shape.m >= shape.n || shape.n - shape.m < 1) throw Error("a run must remove at least one feature");
    if (shape.m < 1) throw Error("minimum subset size must be at least 1");
    std::vector<RunSpec> plan;
    plan.reserve(shape.r);
    for (std::size_t run = 0; run < shape.r; ++run) {
        Rng rng(derive_seed(master_seed, SeedStream::removal_order, run));
        const auto prefix = permutation_prefix(shape.n, shape.n - shape.m, rng);
        RunSpec spec;
        spec.run_id = run;
        spec.removal_sequence.assign(prefix.begin(), prefix.end());
        spec.split_seed = derive_seed(master_seed, SeedStream::run_split, run);
        plan.push_back(std::move(spec));
    }
    return plan;
}

inline std::vector<RunSpec> plan_runs(const LmoConfig& cfg, std::size_t n) {
    return plan_runs(resolve_shape(cfg, n), cfg.master_seed);
}

/// Raised when a run cannot complete; carries where it stopped.
class RunError : public Error {
public:
    RunError(std::size_t run_id, std::size_t step, const std::string& what)
        : Error("run " + std::to_string(run_id) + ", step " + std::to_string(step) + ": " + what),
          run_id_(run_id), step_(step) {}
    std::size_t run_id() const { return run_id_; }
    std::size_t step() const { return step_; }

private:
    std::size_t run_id_;
    std::size_t step_;
};

/// Train and validation halves of one split.
struct SplitData {
    SparseMatrix x_train, x_valid;
    std::vector<double> y_train, y_valid;
};

inline SplitData make_split(const SparseMatrix& x, std::span<const double> y, const SplitSpec& spec) {
    if (x.rows() != y.size()) throw DimensionError("matrix rows and label count differ");
    auto [train, valid] = split_indices(x.rows(), spec);
    SplitData d;
    d.x_train = x.select_rows(train);
    d.x_valid = x.select_rows(valid);
    for (auto i : train) d.y_train.push_back(y[i]);
    for (auto i : valid) d.y_valid.push_back(y[i]);
    return d;
}

/// Validation MSE of a ridge fit on the active columns of a split.
inline double subset_mse(const SplitData& d, const FeatureMask& active, double alpha, const SolverOptions& solver) {
    const auto model = fit_ridge(d.x_train, d.y_train, active, alpha, solver);
    return mse(predict(model, d.x_valid), d.y_valid).mse;
}

/// One backward-removal run with consecutive-MSE differencing: one fit per
/// step, the model without f_t is the model with f_{t+1}.
inline RunResult execute_run(const RunSpec& spec, const SparseMatrix& x, std::span<const double> y,
                             const LmoConfig& cfg) {
    for (auto f : spec.removal_sequence) {
        if (f >= x.cols()) throw RunError(spec.run_id, 0, "removal sequence names column " + std::to_string(f));
    }
    if (spec.removal_sequence.size() >= x.cols()) throw RunError(spec.run_id, 0, "run would remove every feature");

    std::size_t step = 0;
    try {
        const SplitData d = make_split(x, y, {cfg.split_fraction, spec.split_seed});
        FeatureMask active = FeatureMask::all(x.cols());
        RunResult result;
        result.run_id = spec.run_id;
        result.initial_mse = subset_mse(d, active, cfg.alpha, cfg.solver);
        double previous = result.initial_mse;
        result.records.reserve(spec.removal_sequence.size());
        for (; step < spec.removal_sequence.size(); ++step) {
            const ColumnId f = spec.removal_sequence[step];
            if (!active.test(f)) throw Error("feature " + std::to_string(f) + " removed twice");
            active.reset(f);
            const double current = subset_mse(d, active, cfg.alpha, cfg.solver);
            const double delta = current - previous;
            if (!std::isfinite(delta)) throw Error("non-finite leave-one-out error");
            result.records.push_back({spec.run_id, step, f, delta});
            previous = current;
        }
        result.final_mse = previous;
        return result;
    } catch (const RunError&) {
        throw;
    } catch (const std::exception& e) {
        throw RunError(spec.run_id, step, e.what());
    }
}

struct FeatureScore {
    ColumnId feature = 0;
    std::string name;
    FeatureCategory category = FeatureCategory::engineered;
    std::size_t removal_count = 0;
    std::optional<double> lmo_score; ///< absent when never removed

    bool never_removed() const { return removal_count == 0; }
    friend bool operator==(const FeatureScore&, const FeatureScore&) = default;
};

struct ScoreTable {
    std::vector<FeatureScore> features; ///< indexed by column id

    std::size_t never_removed_count() const {
        return static_cast<std::size_t>(
            std::count_if(features.begin(), features.end(), [](const auto& f) { return f.never_removed(); }));
    }
    double mean_removal_count() const {
        if (features.empty()) return 0.0;
        double s = 0.0;
        for (const auto& f : features) s += static_cast<double>(f.removal_count);
        return s / static_cast<double>(features.size());
    }
    friend bool operator==(const ScoreTable&, const ScoreTable&) = default;
};

/// Collects deltas per feature. Merging is concatenation and the final mean
/// is taken over each feature's sorted deltas, so the table does not depend
/// on record order or on how records were partitioned.
class ScoreAccumulator {
public:
    explicit ScoreAccumulator(std::size_t n_features) : deltas_(n_features) {}

    void add(const RemovalRecord& rec) {
        if (rec.feature >= deltas_.size()) throw DimensionError("record names an unknown feature");
        deltas_[rec.feature].push_back(rec.delta);
    }
    void add(std::span<const RemovalRecord> records) {
        for (const auto& r : records) add(r);
    }
    void merge(const ScoreAccumulator& other) {
        if (other.deltas_.size() != deltas_.size()) throw DimensionError("accumulators cover different features");
        for (std::size_t j = 0; j < deltas_.size(); ++j) {
            deltas_[j].insert(deltas_[j].end(), other.deltas_[j].begin(), other.deltas_[j].end());
        }
    }

    ScoreTable table(const FeatureVocabulary& vocab) const {
        if (vocab.size() != deltas_.size()) throw DimensionError("vocabulary size does not match accumulator");
        ScoreTable t;
        t.features.reserve(deltas_.size());
        for (std::size_t j = 0; j < deltas_.size(); ++j) {
            FeatureScore fs;
            fs.feature = static_cast<ColumnId>(j);
            fs.name = vocab[j].name;
            fs.category = vocab[j].category;
            fs.removal_count = deltas_[j].size();
            if (!deltas_[j].empty()) {
                auto d = deltas_[j];
                std::sort(d.begin(), d.end());
                // Neumaier-compensated sum
                double sum = 0.0, comp = 0.0;
                for (double v : d) {
                    const double t2 = sum + v;
                    comp += std::abs(sum) >= std::abs(v) ? (sum - t2) + v : (v - t2) + sum;
                    sum = t2;
                }
                fs.lmo_score = (sum + comp) / static_cast<double>(d.size());
            }
            t.features.push_back(std::move(fs));
        }
        return t;
    }

private:
    std::vector<std::vector<double>> deltas_;
};

inline ScoreTable aggregate_scores(std::span<const RemovalRecord> records, const FeatureVocabulary& vocab) {
    ScoreAccumulator acc(vocab.size());
    acc.add(records);
    return acc.table(vocab);
}

/// Vocabulary of generic names ("f0000", ...) for matrices that did not come
/// from text, e.g. synthetic problems.
inline FeatureVocabulary generic_vocabulary(std::size_t n, FeatureCategory category = FeatureCategory::engineered) {
    std::vector<VocabularyEntry> entries;
    const int width = static_cast<int>(std::to_string(n > 0 ? n - 1 : 0).size());
    for (std::size_t j = 0; j < n; ++j) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "f%0*zu", width, j);
        entries.push_back({buf, category, 0, 0});
    }
    return FeatureVocabulary(std::move(entries), 0);
}

struct RunFailure {
    std::size_t run_id;
    std::string message;
};

struct LmoOptions {
    bool keep_going = false;
    /// Called once per completed run, in ascending run_id order, from whichever
    /// worker completes the next run in sequence.
    std::function<void(const RunResult&)> on_run_complete;
    /// Runs already done (e.g. recovered from a spill); they are not executed again.
    std::map<std::size_t, std::vector<RemovalRecord>> completed;
};

struct LmoResult {
    LmoShape shape;
    ScoreTable table;
    std::vector<RunFailure> failures; ///< only with keep_going
    std::size_t runs_executed = 0;
};

/// Executes every planned run on `cfg.workers` threads and aggregates the
/// records. The table is independent of worker count and completion order.
/// Without keep_going, a failed run aborts the job after in-flight runs finish.
inline LmoResult run_lmo(const LmoConfig& cfg, const SparseMatrix& x, std::span<const double> y,
                         const FeatureVocabulary& vocab, const LmoOptions& opts = {}) {
    if (vocab.size() == 0) throw Error("vocabulary is empty");
    if (vocab.size() != x.cols()) throw DimensionError("vocabulary size does not match matrix columns");
    if (x.rows() != y.size()) throw DimensionError("matrix rows and label count differ");

    LmoResult out;
    out.shape = resolve_shape(cfg, x.cols());
    const auto plan = plan_runs(out.shape, cfg.master_seed);

    std::vector<std::size_t> todo;
    for (const auto& spec : plan) {
        if (!opts.completed.count(spec.run_id)) todo.push_back(spec.run_id);
    }

    std::vector<std::optional<RunResult>> results(plan.size());
    std::vector<char> finished(plan.size(), 0);
    for (const auto& [run, recs] : opts.completed) {
        if (run >= plan.size()) throw Error("recovered records name run " + std::to_string(run) + " outside the plan");
        RunResult rr;
        rr.run_id = run;
        rr.records = recs;
        results[run] = std::move(rr);
        finished[run] = 1;
    }

    std::mutex emit_mutex;
    std::size_t next_to_emit = 0;
    auto emit_ready = [&] {
        // caller holds emit_mutex
        while (next_to_emit < plan.size() && finished[next_to_emit]) {
            if (opts.on_run_complete && results[next_to_emit] && !opts.completed.count(next_to_emit)) {
                opts.on_run_complete(*results[next_to_emit]);
            }
            ++next_to_emit;
        }
    };
    {
        std::lock_guard lock(emit_mutex);
        emit_ready();
    }

    const auto outcome = parallel_for(
        todo.size(), cfg.workers,
        [&](std::size_t k) {
            const auto run = todo[k];
            try {
                auto rr = execute_run(plan[run], x, y, cfg);
                std::lock_guard lock(emit_mutex);
                results[run] = std::move(rr);
                finished[run] = 1;
                emit_ready();
            } catch (...) {
                std::lock_guard lock(emit_mutex);
                finished[run] = 1; // failed runs are skipped in the ordered stream
                emit_ready();
                throw;
            }
        },
        opts.keep_going ? FailurePolicy::keep_going : FailurePolicy::stop);

    for (std::size_t k = 0; k < todo.size(); ++k) {
        if (outcome.started[k]) ++out.runs_executed;
        if (!outcome.errors[k]) continue;
        std::string message;
        try {
            std::rethrow_exception(outcome.errors[k]);
        } catch (const std::exception& e) {
            message = e.what();
        } catch (...) {
            message = "unknown error";
        }
        if (!opts.keep_going) throw Error("leave-many-out job failed: " + message);
        out.failures.push_back({todo[k], message});
    }

    ScoreAccumulator acc(x.cols());
    for (const auto& r : results) {
        if (r) acc.add(r->records);
    }
    out.table = acc.table(vocab);
    return out;
}

// ---- file formats --------------------------------------------------------------

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string spill_header(const LmoShape& s, Seed master_seed) {
    return "# lmofs records v1 master_seed=" + std::to_string(master_seed) + " n=" + std::to_string(s.n) +
           " m=" + std::to_string(s.m) + " r=" + std::to_string(s.r);
}

/// Records spill: header line, then "run_id<TAB>step<TAB>feature_id<TAB>delta" per record.
inline void write_records(std::ostream& out, std::span<const RemovalRecord> records) {
    for (const auto& r : records) {
        out << r.run_id << '\t' << r.step << '\t' << r.feature << '\t' << format_double(r.delta) << '\n';
    }
}

/// Complete runs recovered from a spill. A run counts as complete when it has
/// exactly n - m records with steps 0, 1, ... in order; anything else (an
/// interrupted tail) is dropped. Throws if the header does not match the job.
inline std::map<std::size_t, std::vector<RemovalRecord>> read_complete_runs(std::istream& in, const LmoShape& shape,
                                                                           Seed master_seed) {
    std::string line;
    if (!std::getline(in, line)) return {};
    if (line != spill_header(shape, master_seed)) {
        throw Error("records spill was written by a different job (" + line + ")");
    }
    std::map<std::size_t, std::vector<RemovalRecord>> runs;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto f = split_tabs(line);
        if (f.size() != 4) break; // torn final line
        RemovalRecord r;
        try {
            r.run_id = std::stoull(f[0]);
            r.step = std::stoull(f[1]);
            r.feature = static_cast<ColumnId>(std::stoul(f[2]));
            r.delta = std::stod(f[3]);
        } catch (const std::exception&) {
            break;
        }
        runs[r.run_id].push_back(r);
    }
    const auto expected = shape.removals_per_run();
    for (auto it = runs.begin(); it != runs.end();) {
        bool ok = it->second.size() == expected && it->first < shape.r;
        for (std::size_t k = 0; ok && k < it->second.size(); ++k) ok = it->second[k].step == k;
        it = ok ? std::next(it) : runs.erase(it);
    }
    return runs;
}

// scores.tsv:
//   # lmofs score-table v1 master_seed=<s> vocabulary_hash=<hex>
//   feature_id  name  category  removal_count  lmo_score   (empty score when never removed)
inline void write_score_table(const ScoreTable& t, std::ostream& out, const std::string& header_comment) {
    out << "# lmofs score-table v1 " << header_comment << '\n';
    out << "feature_id\tname\tcategory\tremoval_count\tlmo_score\n";
    for (const auto& f : t.features) {
        out << f.feature << '\t' << escape_field(f.name) << '\t' << to_string(f.category) << '\t' << f.removal_count
            << '\t' << (f.lmo_score ? format_double(*f.lmo_score) : std::string{}) << '\n';
    }
}

inline ScoreTable read_score_table(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("# lmofs score-table v1", 0) != 0) {
        throw ParseError("not a score table file");
    }
    ScoreTable t;
    while (std::getline(in, line)) {
        if (line.empty() || line.rfind("feature_id\t", 0) == 0 || line[0] == '#') continue;
        const auto f = split_tabs(line);
        if (f.size() != 5) throw ParseError("bad score table row: " + line);
        FeatureScore fs;
        fs.feature = static_cast<ColumnId>(std::stoul(f[0]));
        if (fs.feature != t.features.size()) throw ParseError("score table rows out of order");
        fs.name = unescape_field(f[1]);
        fs.category = parse_category(f[2]);
        fs.removal_count = std::stoull(f[3]);
        if (!f[4].empty()) fs.lmo_score = std::stod(f[4]);
        if (fs.lmo_score.has_value() == (fs.removal_count == 0)) {
            throw ParseError("score presence must match removal count: " + line);
        }
        t.features.push_back(std::move(fs));
    }
    return t;
}

} // namespace lmofs
