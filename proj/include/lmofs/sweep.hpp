#pragma once

// Ranking by leave-many-out score, nested top-k subsets, their evaluation on
// one constant split, and the high-impact feature report.

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "features.hpp"
#include "lmo.hpp"
#include "ridge.hpp"
#include "worker_pool.hpp"

namespace lmofs {

/// Descending score, ties by ascending name then column id; never-removed
/// features go last in name order. Appends a warning when nothing was scored.
inline std::vector<ColumnId> rank_features(const ScoreTable& table, std::vector<std::string>* warnings = nullptr) {
    std::vector<const FeatureScore*> scored, unscored;
    for (const auto& f : table.features) (f.lmo_score ? scored : unscored).push_back(&f);
    std::sort(scored.begin(), scored.end(), [](const FeatureScore* a, const FeatureScore* b) {
        if (*a->lmo_score != *b->lmo_score) return *a->lmo_score > *b->lmo_score;
        if (a->name != b->name) return a->name < b->name;
        return a->feature < b->feature;
    });
    std::sort(unscored.begin(), unscored.end(), [](const FeatureScore* a, const FeatureScore* b) {
        if (a->name != b->name) return a->name < b->name;
        return a->feature < b->feature;
    });
    if (warnings && !unscored.empty()) {
        warnings->push_back(scored.empty() ? "no feature was ever removed; ranking falls back to name order"
                                           : std::to_string(unscored.size()) +
                                                 " features were never removed and rank last");
    }
    std::vector<ColumnId> out;
    out.reserve(table.features.size());
    for (const auto* f : scored) out.push_back(f->feature);
    for (const auto* f : unscored) out.push_back(f->feature);
    return out;
}

enum class SubsetRounding { floor, ceil };

/// Features kept at a retained fraction. Guarded against representation error
/// (0.005 * 1000 is 5, not 6 or 4).
inline std::size_t subset_size(double fraction, std::size_t n, SubsetRounding rounding = SubsetRounding::floor) {
    const double exact = fraction * static_cast<double>(n);
    const double k = rounding == SubsetRounding::floor ? std::floor(exact + 1e-9) : std::ceil(exact - 1e-9);
    return static_cast<std::size_t>(k);
}

/// 100%, 98%, ..., 2%, then 1.5%, 1%, 0.5% (53 fractions).
inline std::vector<double> default_fractions() {
    std::vector<double> f;
    for (int pct = 100; pct >= 2; pct -= 2) f.push_back(pct / 100.0);
    f.push_back(0.015);
    f.push_back(0.010);
    f.push_back(0.005);
    return f;
}

/// Drops fractions that would keep no feature out of n.
inline std::vector<double> feasible_fractions(std::vector<double> fractions, std::size_t n,
                                              SubsetRounding rounding = SubsetRounding::floor) {
    std::erase_if(fractions, [&](double f) { return subset_size(f, n, rounding) == 0; });
    return fractions;
}

/// Subset k holds the first subset_size(fractions[k], n) ranked features.
inline std::vector<FeatureMask> build_percent_subsets(const std::vector<ColumnId>& ranked,
                                                      const std::vector<double>& fractions,
                                                      SubsetRounding rounding = SubsetRounding::floor) {
    const std::size_t n = ranked.size();
    std::vector<FeatureMask> out;
    out.reserve(fractions.size());
    for (double f : fractions) {
        if (!(f > 0.0 && f <= 1.0)) throw Error("retained fraction " + std::to_string(f) + " outside (0,1]");
        const auto k = subset_size(f, n, rounding);
        if (k == 0) throw Error("retained fraction " + std::to_string(f) + " keeps no feature out of " + std::to_string(n));
        out.push_back(FeatureMask::from_columns(n, std::span<const ColumnId>(ranked.data(), std::min(k, n))));
    }
    return out;
}

struct SubsetEvaluation {
    double retained_fraction = 1.0;
    std::size_t subset_size = 0;
    double validation_mse = 0.0;
    Seed split_seed = 0;
    FeatureMask subset;
};

/// Fits every subset on the same split and records validation MSE. Output is
/// ordered by descending fraction regardless of input order.
inline std::vector<SubsetEvaluation> evaluate_subsets(const std::vector<FeatureMask>& subsets,
                                                      const std::vector<double>& fractions, const SparseMatrix& x,
                                                      std::span<const double> y, const SplitSpec& split,
                                                      double alpha = 1.0, std::size_t workers = 1,
                                                      const SolverOptions& solver = {}) {
    if (subsets.size() != fractions.size()) throw Error("one fraction per subset is required");
    const SplitData d = make_split(x, y, split);
    std::vector<SubsetEvaluation> evals(subsets.size());
    const auto outcome = parallel_for(subsets.size(), workers, [&](std::size_t k) {
        try {
            evals[k] = {fractions[k], subsets[k].count(), subset_mse(d, subsets[k], alpha, solver), split.seed,
                        subsets[k]};
        } catch (const std::exception& e) {
            throw Error("subset at fraction " + std::to_string(fractions[k]) + ": " + e.what());
        }
    });
    for (const auto& e : outcome.errors) {
        if (e) std::rethrow_exception(e);
    }
    std::stable_sort(evals.begin(), evals.end(), [](const auto& a, const auto& b) {
        if (a.retained_fraction != b.retained_fraction) return a.retained_fraction > b.retained_fraction;
        return a.subset_size > b.subset_size;
    });
    return evals;
}

/// Lowest validation MSE; ties go to the larger subset.
inline SubsetEvaluation select_best(const std::vector<SubsetEvaluation>& evals) {
    if (evals.empty()) throw Error("no subset evaluations to choose from");
    const auto* best = &evals.front();
    for (const auto& e : evals) {
        if (e.validation_mse < best->validation_mse ||
            (e.validation_mse == best->validation_mse &&
             (e.subset_size > best->subset_size ||
              (e.subset_size == best->subset_size && e.retained_fraction > best->retained_fraction)))) {
            best = &e;
        }
    }
    return *best;
}

struct ImpactReport {
    double threshold = 1e-5;
    std::map<FeatureCategory, std::vector<FeatureScore>> by_category; ///< ascending score
    std::size_t scored_features = 0;
    std::size_t negative_features = 0;

    double negative_fraction() const {
        return scored_features ? static_cast<double>(negative_features) / static_cast<double>(scored_features) : 0.0;
    }
    std::size_t size() const {
        std::size_t s = 0;
        for (const auto& [c, v] : by_category) s += v.size();
        return s;
    }
};

/// Features with |score| > threshold, grouped by category.
inline ImpactReport impact_report(const ScoreTable& table, double threshold = 1e-5) {
    ImpactReport rep;
    rep.threshold = threshold;
    for (const auto& f : table.features) {
        if (!f.lmo_score) continue;
        ++rep.scored_features;
        if (*f.lmo_score < 0.0) ++rep.negative_features;
        if (std::abs(*f.lmo_score) > threshold) rep.by_category[f.category].push_back(f);
    }
    for (auto& [c, v] : rep.by_category) {
        std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
            if (*a.lmo_score != *b.lmo_score) return *a.lmo_score < *b.lmo_score;
            return a.name < b.name;
        });
    }
    return rep;
}

// ---- file formats --------------------------------------------------------------

inline std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

// sweep.csv: comment header, then fraction,subset_size,validation_mse
inline void write_sweep_csv(const std::vector<SubsetEvaluation>& evals, std::ostream& out,
                            const std::string& header_comment) {
    out << "# lmofs sweep v1 " << header_comment << '\n';
    out << "fraction,subset_size,validation_mse\n";
    for (const auto& e : evals) {
        out << format_double(e.retained_fraction) << ',' << e.subset_size << ',' << format_double(e.validation_mse)
            << '\n';
    }
}

// impact.tsv: category, feature_id, name, lmo_score, removal_count
inline void write_impact_tsv(const ImpactReport& rep, std::ostream& out, const std::string& header_comment) {
    out << "# lmofs impact v1 " << header_comment << " threshold=" << format_double(rep.threshold)
        << " negative_fraction=" << format_double(rep.negative_fraction()) << '\n';
    out << "category\tfeature_id\tname\tlmo_score\tremoval_count\n";
    for (const auto& [cat, rows] : rep.by_category) {
        for (const auto& f : rows) {
            out << to_string(cat) << '\t' << f.feature << '\t' << escape_field(f.name) << '\t'
                << format_double(*f.lmo_score) << '\t' << f.removal_count << '\n';
        }
    }
}

// impact_by_category.csv: category,rank,name,lmo_score (plot data, ascending per category)
inline void write_impact_plot_csv(const ImpactReport& rep, std::ostream& out) {
    out << "category,rank,name,lmo_score\n";
    for (const auto& [cat, rows] : rep.by_category) {
        for (std::size_t k = 0; k < rows.size(); ++k) {
            out << to_string(cat) << ',' << k + 1 << ',' << csv_field(rows[k].name) << ','
                << format_double(*rows[k].lmo_score) << '\n';
        }
    }
}

// selected_subset.tsv:
//   # lmofs selected-subset v1
//   # vocabulary_hash=<hex>
//   # <free-form provenance>
//   category<TAB>name   (one retained feature per line, column order)
inline void write_selected_subset(const FeatureMask& subset, const FeatureVocabulary& vocab, std::ostream& out,
                                  const std::string& header_comment) {
    if (subset.size() != vocab.size()) throw DimensionError("subset does not match vocabulary");
    out << "# lmofs selected-subset v1\n# vocabulary_hash=" << hash_hex(vocab.hash()) << "\n# " << header_comment
        << '\n';
    for (auto c : subset.columns()) out << to_string(vocab[c].category) << '\t' << escape_field(vocab[c].name) << '\n';
}

/// Maps a selected-subset file back onto a vocabulary; the recorded hash must match.
inline FeatureMask read_selected_subset(std::istream& in, const FeatureVocabulary& vocab) {
    std::string line;
    if (!std::getline(in, line) || line != "# lmofs selected-subset v1") throw ParseError("not a selected-subset file");
    FeatureMask mask(vocab.size());
    bool hash_seen = false;
    while (std::getline(in, line)) {
        if (line.rfind("# vocabulary_hash=", 0) == 0) {
            if (line.substr(18) != hash_hex(vocab.hash())) {
                throw Error("selected subset was built against a different vocabulary");
            }
            hash_seen = true;
            continue;
        }
        if (line.empty() || line[0] == '#') continue;
        const auto f = split_tabs(line);
        if (f.size() != 2) throw ParseError("bad selected-subset row: " + line);
        const auto col = vocab.find(parse_category(f[0]), unescape_field(f[1]));
        if (!col) throw Error("selected feature '" + f[1] + "' is not in the vocabulary");
        mask.set(*col);
    }
    if (!hash_seen) throw ParseError("selected-subset file lacks a vocabulary hash");
    return mask;
}

} // namespace lmofs
