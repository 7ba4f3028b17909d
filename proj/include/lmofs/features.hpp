#pragma once

// Sparse feature extraction: character and word 1-3-grams weighted by tf-idf,
// twelve engineered features, and one occurrence count per word list.

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dataset.hpp"
#include "error.hpp"
#include "resources.hpp"
#include "sparse_matrix.hpp"
#include "text.hpp"

namespace lmofs {

enum class FeatureCategory : std::uint8_t { char_ngram = 0, word_ngram = 1, engineered = 2, wordlist = 3 };

inline std::string_view to_string(FeatureCategory c) {
    switch (c) {
    case FeatureCategory::char_ngram: return "char_ngram";
    case FeatureCategory::word_ngram: return "word_ngram";
    case FeatureCategory::engineered: return "engineered";
    case FeatureCategory::wordlist: return "wordlist";
    }
    return "?";
}

inline FeatureCategory parse_category(std::string_view s) {
    for (auto c : {FeatureCategory::char_ngram, FeatureCategory::word_ngram, FeatureCategory::engineered,
                   FeatureCategory::wordlist}) {
        if (to_string(c) == s) return c;
    }
    throw ParseError("unknown feature category '" + std::string(s) + "'");
}

inline constexpr std::size_t kEngineeredCount = 12;

/// Engineered feature names in the order engineered_features() returns them.
inline constexpr std::array<std::string_view, kEngineeredCount> kEngineeredNames = {
    "mean_word_length", "max_word_length",    "char_count", "at_count",    "hash_count",         "dot_count",
    "starts_with_number", "abbreviation_count", "has_media", "part_of_day", "sentiment_polarity", "readability_grade",
};

struct VocabularyEntry {
    std::string name;
    FeatureCategory category;
    std::uint64_t occurrences = 0;        ///< training-corpus count (n-grams only)
    std::uint32_t document_frequency = 0; ///< training documents containing it (n-grams only)

    friend bool operator==(const VocabularyEntry&, const VocabularyEntry&) = default;
};

/// How "occurs more than twice" is counted.
enum class NgramCountMode { corpus_occurrences, document_frequency };

struct VocabularyOptions {
    std::uint64_t min_count = 3;
    NgramCountMode count_mode = NgramCountMode::corpus_occurrences;
};

/// Column id -> (name, category), ordered by category then name. Names are
/// unique within a category; the same string may name a char and a word n-gram.
class FeatureVocabulary {
public:
    FeatureVocabulary() = default;
    FeatureVocabulary(std::vector<VocabularyEntry> entries, std::size_t n_documents)
        : entries_(std::move(entries)), n_documents_(n_documents) {
        for (std::size_t j = 0; j < entries_.size(); ++j) {
            auto& idx = index_[static_cast<std::size_t>(entries_[j].category)];
            if (!idx.emplace(entries_[j].name, static_cast<ColumnId>(j)).second) {
                throw Error("duplicate vocabulary entry '" + entries_[j].name + "'");
            }
        }
    }

    std::size_t size() const { return entries_.size(); }
    std::size_t n_documents() const { return n_documents_; }
    const std::vector<VocabularyEntry>& entries() const { return entries_; }
    const VocabularyEntry& operator[](std::size_t j) const { return entries_.at(j); }

    std::optional<ColumnId> find(FeatureCategory c, const std::string& name) const {
        const auto& idx = index_[static_cast<std::size_t>(c)];
        const auto it = idx.find(name);
        if (it == idx.end()) return std::nullopt;
        return it->second;
    }

    std::size_t count(FeatureCategory c) const { return index_[static_cast<std::size_t>(c)].size(); }

    /// Smoothed idf: ln((1+N)/(1+df)) + 1.
    double idf(std::size_t column) const {
        const double df = entries_[column].document_frequency;
        return std::log((1.0 + static_cast<double>(n_documents_)) / (1.0 + df)) + 1.0;
    }

    /// FNV-1a over document count and every entry; identifies the column space
    /// that matrices, models and subsets were built against.
    std::uint64_t hash() const {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        auto mix = [&h](std::string_view bytes) {
            for (unsigned char b : bytes) {
                h ^= b;
                h *= 0x100000001b3ULL;
            }
        };
        mix("lmofs-vocabulary-v1");
        mix(std::to_string(n_documents_));
        for (const auto& e : entries_) {
            mix("\x1f");
            mix(to_string(e.category));
            mix("\x1f");
            mix(e.name);
            mix("\x1f");
            mix(std::to_string(e.document_frequency));
        }
        return h;
    }

    friend bool operator==(const FeatureVocabulary& a, const FeatureVocabulary& b) {
        return a.n_documents_ == b.n_documents_ && a.entries_ == b.entries_;
    }

private:
    std::vector<VocabularyEntry> entries_;
    std::size_t n_documents_ = 0;
    std::array<std::unordered_map<std::string, ColumnId>, 4> index_;
};

inline std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace detail {

struct NgramStats {
    std::uint64_t occurrences = 0;
    std::uint32_t documents = 0;
    std::size_t last_doc = static_cast<std::size_t>(-1);
};

inline void count_grams(std::unordered_map<std::string, NgramStats>& stats, const std::vector<std::string>& grams,
                        std::size_t doc) {
    for (const auto& g : grams) {
        auto& s = stats[g];
        ++s.occurrences;
        if (s.last_doc != doc) {
            ++s.documents;
            s.last_doc = doc;
        }
    }
}

inline std::vector<VocabularyEntry> keep_frequent(const std::unordered_map<std::string, NgramStats>& stats,
                                                  FeatureCategory cat, const VocabularyOptions& opts) {
    std::vector<VocabularyEntry> out;
    for (const auto& [gram, s] : stats) {
        const std::uint64_t c = opts.count_mode == NgramCountMode::corpus_occurrences ? s.occurrences : s.documents;
        if (c >= opts.min_count) out.push_back({gram, cat, s.occurrences, s.documents});
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
    return out;
}

} // namespace detail

/// Vocabulary over a training corpus: every char and word 1-3-gram meeting the
/// count threshold, the 12 engineered columns, and one column per word list.
inline FeatureVocabulary build_vocabulary(const Dataset& train, const std::vector<WordListResource>& lists,
                                          const VocabularyOptions& opts = {}) {
    if (train.empty()) throw Error("cannot build a vocabulary from an empty corpus");
    std::unordered_map<std::string, detail::NgramStats> chars, words;
    for (std::size_t d = 0; d < train.size(); ++d) {
        const auto& text = train.instances[d].text;
        detail::count_grams(chars, char_ngrams(text), d);
        detail::count_grams(words, word_ngrams(tokenize(text)), d);
    }

    std::vector<VocabularyEntry> entries = detail::keep_frequent(chars, FeatureCategory::char_ngram, opts);
    auto w = detail::keep_frequent(words, FeatureCategory::word_ngram, opts);
    entries.insert(entries.end(), w.begin(), w.end());

    std::vector<std::string> eng(kEngineeredNames.begin(), kEngineeredNames.end());
    std::sort(eng.begin(), eng.end());
    for (auto& name : eng) entries.push_back({std::move(name), FeatureCategory::engineered, 0, 0});

    std::vector<std::string> list_names;
    for (const auto& l : lists) list_names.push_back(l.name);
    std::sort(list_names.begin(), list_names.end());
    if (std::adjacent_find(list_names.begin(), list_names.end()) != list_names.end()) {
        throw Error("word list names must be unique");
    }
    for (auto& name : list_names) entries.push_back({std::move(name), FeatureCategory::wordlist, 0, 0});

    return FeatureVocabulary(std::move(entries), train.size());
}

using RawCounts = std::vector<std::pair<ColumnId, double>>;

/// count * idf per n-gram column, then the block is scaled to unit L2 norm.
/// An all-zero block stays empty.
inline std::vector<SparseEntry> tfidf_transform(const RawCounts& counts,
                                                std::span<const std::uint32_t> document_frequency,
                                                std::size_t n_documents) {
    std::vector<SparseEntry> out;
    out.reserve(counts.size());
    double norm2 = 0.0;
    for (const auto& [col, tf] : counts) {
        const double idf =
            std::log((1.0 + static_cast<double>(n_documents)) / (1.0 + document_frequency[col])) + 1.0;
        const double v = tf * idf;
        if (v == 0.0) continue;
        out.push_back({col, v});
        norm2 += v * v;
    }
    if (norm2 > 0.0) {
        const double inv = 1.0 / std::sqrt(norm2);
        for (auto& e : out) e.value *= inv;
    }
    return out;
}

/// Hour 0-5 -> 1, 6-11 -> 2, 12-17 -> 3, 18-23 -> 4; no timestamp -> 0.
inline int part_of_day(const std::optional<DateTime>& t) {
    if (!t) return 0;
    return t->hour / 6 + 1;
}

/// Lookup state for the engineered features that need resources.
struct EngineeredResources {
    PhraseMatcher abbreviations;
    SentimentLexicon lexicon;
};

/// The twelve engineered features, in kEngineeredNames order.
inline std::array<double, kEngineeredCount> engineered_features(const Instance& inst,
                                                                const EngineeredResources& res) {
    const auto tokens = tokenize_detailed(inst.text);
    std::vector<std::string> token_text;
    token_text.reserve(tokens.size());
    std::size_t words = 0, total_len = 0, max_len = 0;
    for (const auto& t : tokens) {
        token_text.push_back(t.text);
        if (t.kind != TokenKind::word) continue;
        const auto len = utf8::decode(t.text).size();
        ++words;
        total_len += len;
        max_len = std::max(max_len, len);
    }
    const auto text_cps = utf8::decode(inst.text);
    double at = 0, hash = 0, dot = 0;
    for (char32_t c : text_cps) {
        at += c == U'@';
        hash += c == U'#';
        dot += c == U'.';
    }
    double starts_with_number = 0;
    for (char32_t c : text_cps) {
        if (utf8::is_space(c)) continue;
        starts_with_number = (c >= U'0' && c <= U'9') ? 1 : 0;
        break;
    }

    return {
        words ? static_cast<double>(total_len) / static_cast<double>(words) : 0.0,
        static_cast<double>(max_len),
        static_cast<double>(text_cps.size()),
        at,
        hash,
        dot,
        starts_with_number,
        static_cast<double>(res.abbreviations.count(token_text)),
        inst.has_media.value_or(false) ? 1.0 : 0.0,
        static_cast<double>(part_of_day(inst.timestamp)),
        res.lexicon.polarity(token_text),
        flesch_kincaid_grade(inst.text),
    };
}

/// Occurrences of each list's entries in the tokens (multiset semantics,
/// phrases matched as token subsequences).
inline std::vector<double> wordlist_features(const std::vector<std::string>& tokens,
                                             const std::vector<PhraseMatcher>& lists) {
    std::vector<double> out;
    out.reserve(lists.size());
    for (const auto& m : lists) out.push_back(static_cast<double>(m.count(tokens)));
    return out;
}

inline std::vector<double> wordlist_features(const std::vector<std::string>& tokens,
                                             const std::vector<WordListResource>& lists) {
    std::vector<PhraseMatcher> matchers;
    for (const auto& l : lists) matchers.emplace_back(l.entries);
    return wordlist_features(tokens, matchers);
}

/// Turns instances into rows of a vocabulary's column space.
class FeatureExtractor {
public:
    FeatureExtractor(const FeatureVocabulary& vocab, const ResourceBundle& resources) : vocab_(vocab) {
        res_.abbreviations = PhraseMatcher(resources.abbreviations);
        res_.lexicon = resources.lexicon;

        std::size_t ngram_cols = 0;
        for (std::size_t j = 0; j < vocab.size(); ++j) {
            const auto& e = vocab[j];
            if (e.category == FeatureCategory::char_ngram || e.category == FeatureCategory::word_ngram) {
                ngram_cols = j + 1;
            }
        }
        df_.resize(ngram_cols);
        for (std::size_t j = 0; j < ngram_cols; ++j) df_[j] = vocab[j].document_frequency;

        for (std::size_t k = 0; k < kEngineeredCount; ++k) {
            const auto col = vocab.find(FeatureCategory::engineered, std::string(kEngineeredNames[k]));
            if (!col) throw DimensionError("vocabulary lacks engineered column '" + std::string(kEngineeredNames[k]) + "'");
            engineered_cols_[k] = *col;
        }
        if (vocab.count(FeatureCategory::wordlist) != resources.word_lists.size()) {
            throw DimensionError("vocabulary has " + std::to_string(vocab.count(FeatureCategory::wordlist)) +
                                 " word-list columns but " + std::to_string(resources.word_lists.size()) +
                                 " lists were supplied");
        }
        for (const auto& l : resources.word_lists) {
            const auto col = vocab.find(FeatureCategory::wordlist, l.name);
            if (!col) throw DimensionError("vocabulary lacks word-list column '" + l.name + "'");
            list_cols_.push_back(*col);
            list_matchers_.emplace_back(l.entries);
        }
        const std::size_t expected = vocab.count(FeatureCategory::char_ngram) +
                                     vocab.count(FeatureCategory::word_ngram) + kEngineeredCount +
                                     resources.word_lists.size();
        if (expected != vocab.size()) throw DimensionError("vocabulary column count is inconsistent");
    }

    std::vector<SparseEntry> row(const Instance& inst) const {
        const auto tokens = tokenize(inst.text);
        std::map<ColumnId, double> counts;
        for (const auto& g : char_ngrams(inst.text)) {
            if (auto c = vocab_.find(FeatureCategory::char_ngram, g)) counts[*c] += 1.0;
        }
        for (const auto& g : word_ngrams(tokens)) {
            if (auto c = vocab_.find(FeatureCategory::word_ngram, g)) counts[*c] += 1.0;
        }
        auto entries = tfidf_transform(RawCounts(counts.begin(), counts.end()), df_, vocab_.n_documents());

        const auto eng = engineered_features(inst, res_);
        for (std::size_t k = 0; k < kEngineeredCount; ++k) entries.push_back({engineered_cols_[k], eng[k]});
        const auto lists = wordlist_features(tokens, list_matchers_);
        for (std::size_t k = 0; k < lists.size(); ++k) entries.push_back({list_cols_[k], lists[k]});
        return entries;
    }

    SparseMatrix extract(const Dataset& ds) const {
        SparseMatrix m(0, vocab_.size());
        for (const auto& inst : ds.instances) m.push_row(row(inst));
        return m;
    }

private:
    const FeatureVocabulary& vocab_;
    EngineeredResources res_;
    std::vector<std::uint32_t> df_;
    std::array<ColumnId, kEngineeredCount> engineered_cols_{};
    std::vector<ColumnId> list_cols_;
    std::vector<PhraseMatcher> list_matchers_;
};

inline SparseMatrix extract_matrix(const Dataset& ds, const FeatureVocabulary& vocab, const ResourceBundle& resources) {
    return FeatureExtractor(vocab, resources).extract(ds);
}

// ---- text serialization ------------------------------------------------------

/// Backslash-escapes tab, newline, carriage return and backslash for TSV fields.
inline std::string escape_field(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
        case '\\': out += "\\\\"; break;
        case '\t': out += "\\t"; break;
        case '\n': out += "\\n"; break;
        case '\r': out += "\\r"; break;
        default: out += c;
        }
    }
    return out;
}

inline std::string unescape_field(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] != '\\' || i + 1 == s.size()) {
            out += s[i];
            continue;
        }
        switch (s[++i]) {
        case 't': out += '\t'; break;
        case 'n': out += '\n'; break;
        case 'r': out += '\r'; break;
        default: out += s[i];
        }
    }
    return out;
}

inline std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
        const auto tab = line.find('\t', start);
        fields.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
        if (tab == std::string::npos) break;
        start = tab + 1;
    }
    return fields;
}

// vocabulary.tsv:
//   # lmofs vocabulary v1
//   # documents=<N>
//   # hash=<16 hex digits>
//   column  category  occurrences  document_frequency  name
inline void write_vocabulary(const FeatureVocabulary& vocab, std::ostream& out) {
    out << "# lmofs vocabulary v1\n# documents=" << vocab.n_documents() << "\n# hash=" << hash_hex(vocab.hash())
        << "\ncolumn\tcategory\toccurrences\tdocument_frequency\tname\n";
    for (std::size_t j = 0; j < vocab.size(); ++j) {
        const auto& e = vocab[j];
        out << j << '\t' << to_string(e.category) << '\t' << e.occurrences << '\t' << e.document_frequency << '\t'
            << escape_field(e.name) << '\n';
    }
}

inline FeatureVocabulary read_vocabulary(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != "# lmofs vocabulary v1") throw ParseError("not a vocabulary file");
    std::size_t docs = 0;
    std::string hash;
    std::vector<VocabularyEntry> entries;
    while (std::getline(in, line)) {
        if (line.rfind("# documents=", 0) == 0) {
            docs = std::stoull(line.substr(12));
        } else if (line.rfind("# hash=", 0) == 0) {
            hash = line.substr(7);
        } else if (line.rfind("column\t", 0) == 0 || line.empty()) {
            continue;
        } else {
            const auto f = split_tabs(line);
            if (f.size() != 5 || std::stoull(f[0]) != entries.size()) throw ParseError("bad vocabulary row: " + line);
            entries.push_back({unescape_field(f[4]), parse_category(f[1]), std::stoull(f[2]),
                               static_cast<std::uint32_t>(std::stoul(f[3]))});
        }
    }
    FeatureVocabulary vocab(std::move(entries), docs);
    if (!hash.empty() && hash != hash_hex(vocab.hash())) throw ParseError("vocabulary hash mismatch");
    return vocab;
}

} // namespace lmofs
