#include <gtest/gtest.h>

#include <cctype>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "lmofs/features.hpp"

using namespace lmofs;

namespace {

// Fixture texts contain only ASCII letters, digits, single spaces and
// space-separated '!', so the oracle tokenizer is a plain whitespace split.
const std::vector<std::string> kPosts = {
    "You Will Not Believe This",
    "you will love this",
    "this is not news",
    "ten things you will love !",
    "you will not believe it",
};

Dataset corpus(const std::vector<std::string>& texts) {
    Dataset ds;
    for (std::size_t i = 0; i < texts.size(); ++i) ds.instances.push_back({std::to_string(i), texts[i], {}, {}, 0.5});
    return ds;
}

std::vector<std::string> oracle_tokens(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string w;
    while (in >> w) {
        for (auto& c : w) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        out.push_back(w);
    }
    return out;
}

struct OracleCounts {
    std::map<std::string, std::pair<std::uint64_t, std::uint32_t>> chars, words; // occurrences, documents
};

OracleCounts oracle_count(const std::vector<std::string>& texts) {
    OracleCounts oc;
    for (const auto& t : texts) {
        std::string lower;
        for (char c : t) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        std::set<std::string> seen_c, seen_w;
        for (std::size_t n = 1; n <= 3; ++n) {
            for (std::size_t i = 0; i + n <= lower.size(); ++i) {
                const auto g = lower.substr(i, n);
                ++oc.chars[g].first;
                if (seen_c.insert(g).second) ++oc.chars[g].second;
            }
        }
        const auto toks = oracle_tokens(t);
        for (std::size_t n = 1; n <= 3; ++n) {
            for (std::size_t i = 0; i + n <= toks.size(); ++i) {
                std::string g = toks[i];
                for (std::size_t k = 1; k < n; ++k) g += " " + toks[i + k];
                ++oc.words[g].first;
                if (seen_w.insert(g).second) ++oc.words[g].second;
            }
        }
    }
    return oc;
}

ResourceBundle tiny_resources() {
    ResourceBundle r;
    r.word_lists.push_back({"pronouns", {"you", "your"}});
    r.word_lists.push_back({"teasers", {"believe", "you will not believe"}});
    r.abbreviations = {"etc.", "omg"};
    r.lexicon = SentimentLexicon({{"love", 3.2}, {"news", 0.0}});
    return r;
}

} // namespace

TEST(Vocabulary, MatchesBruteForceCounts) {
    const auto texts = kPosts;
    const auto vocab = build_vocabulary(corpus(texts), tiny_resources().word_lists);
    const auto oc = oracle_count(texts);

    std::map<std::pair<FeatureCategory, std::string>, std::pair<std::uint64_t, std::uint32_t>> expected;
    for (const auto& [g, c] : oc.chars) {
        if (c.first >= 3) expected[{FeatureCategory::char_ngram, g}] = c;
    }
    for (const auto& [g, c] : oc.words) {
        if (c.first >= 3) expected[{FeatureCategory::word_ngram, g}] = c;
    }
    std::map<std::pair<FeatureCategory, std::string>, std::pair<std::uint64_t, std::uint32_t>> got;
    for (const auto& e : vocab.entries()) {
        if (e.category == FeatureCategory::char_ngram || e.category == FeatureCategory::word_ngram) {
            got[{e.category, e.name}] = {e.occurrences, e.document_frequency};
        }
    }
    EXPECT_EQ(got, expected);
    EXPECT_TRUE(vocab.find(FeatureCategory::word_ngram, "you will"));
    EXPECT_TRUE(vocab.find(FeatureCategory::word_ngram, "you will not") == std::nullopt); // occurs twice
    EXPECT_EQ(vocab.count(FeatureCategory::engineered), kEngineeredCount);
    EXPECT_EQ(vocab.count(FeatureCategory::wordlist), 2u);
    EXPECT_EQ(vocab.n_documents(), texts.size());
}

TEST(Vocabulary, ThresholdPropertyForSeveralCutoffs) {
    const auto oc = oracle_count(kPosts);
    for (std::uint64_t t : {1u, 2u, 3u, 5u, 8u}) {
        const auto vocab = build_vocabulary(corpus(kPosts), {}, {t, NgramCountMode::corpus_occurrences});
        std::size_t expected = 0;
        for (const auto& [g, c] : oc.chars) expected += c.first >= t;
        for (const auto& [g, c] : oc.words) expected += c.first >= t;
        EXPECT_EQ(vocab.count(FeatureCategory::char_ngram) + vocab.count(FeatureCategory::word_ngram), expected);
        for (const auto& e : vocab.entries()) {
            if (e.category == FeatureCategory::char_ngram || e.category == FeatureCategory::word_ngram) {
                EXPECT_GE(e.occurrences, t);
            }
        }
    }
}

TEST(Vocabulary, DocumentFrequencyMode) {
    const auto oc = oracle_count(kPosts);
    const auto vocab = build_vocabulary(corpus(kPosts), {}, {3, NgramCountMode::document_frequency});
    std::size_t expected = 0;
    for (const auto& [g, c] : oc.words) expected += c.second >= 3;
    EXPECT_EQ(vocab.count(FeatureCategory::word_ngram), expected);
}

TEST(Vocabulary, ColumnsOrderedByCategoryThenName) {
    const auto vocab = build_vocabulary(corpus(kPosts), tiny_resources().word_lists);
    for (std::size_t j = 1; j < vocab.size(); ++j) {
        const auto& a = vocab[j - 1];
        const auto& b = vocab[j];
        EXPECT_TRUE(a.category < b.category || (a.category == b.category && a.name < b.name)) << j;
    }
}

TEST(Vocabulary, TsvRoundTripPreservesHash) {
    const auto vocab = build_vocabulary(corpus({"tab\there ok", "tab\there ok", "tab\there ok"}), tiny_resources().word_lists);
    std::stringstream s;
    write_vocabulary(vocab, s);
    const auto back = read_vocabulary(s);
    EXPECT_EQ(back, vocab);
    EXPECT_EQ(back.hash(), vocab.hash());

    std::ostringstream again;
    write_vocabulary(vocab, again);
    std::string text = again.str();
    text.replace(text.find("\tchar_count"), 11, "\tchar_kount");
    std::istringstream tampered(text);
    EXPECT_THROW(read_vocabulary(tampered), Error);
}

TEST(Vocabulary, EmptyCorpusIsAnError) {
    EXPECT_THROW(build_vocabulary(Dataset{}, {}), Error);
}

TEST(Tfidf, MatchesIndependentRecomputation) {
    const std::vector<std::string> docs = {"red fish", "blue fish", "red red car", "old car"};
    const auto vocab = build_vocabulary(corpus(docs), tiny_resources().word_lists, {1});
    const auto oc = oracle_count(docs);
    const FeatureExtractor ex(vocab, tiny_resources());
    const double n = static_cast<double>(docs.size());

    for (std::size_t d = 0; d < docs.size(); ++d) {
        const auto local = oracle_count({docs[d]});
        std::map<std::pair<FeatureCategory, std::string>, double> w;
        double norm2 = 0.0;
        auto add = [&](FeatureCategory cat, const auto& mine, const auto& global) {
            for (const auto& [g, c] : mine) {
                const double idf = std::log((1.0 + n) / (1.0 + global.at(g).second)) + 1.0;
                w[{cat, g}] = static_cast<double>(c.first) * idf;
                norm2 += w[{cat, g}] * w[{cat, g}];
            }
        };
        add(FeatureCategory::char_ngram, local.chars, oc.chars);
        add(FeatureCategory::word_ngram, local.words, oc.words);

        const auto row = ex.row(corpus(docs).instances[d]);
        std::size_t ngram_entries = 0;
        for (const auto& e : row) {
            const auto& v = vocab[e.column];
            if (v.category != FeatureCategory::char_ngram && v.category != FeatureCategory::word_ngram) continue;
            ++ngram_entries;
            EXPECT_NEAR(e.value, w.at({v.category, v.name}) / std::sqrt(norm2), 1e-12) << v.name;
        }
        EXPECT_EQ(ngram_entries, w.size());
    }
}

TEST(Tfidf, IdfIsOneWhenTermInEveryDocument) {
    const auto vocab = build_vocabulary(corpus({"zz", "zz", "zz"}), {});
    const auto col = vocab.find(FeatureCategory::word_ngram, "zz");
    ASSERT_TRUE(col);
    EXPECT_DOUBLE_EQ(vocab.idf(*col), 1.0);
}

TEST(Tfidf, SingleTermNormalizesToOne) {
    const std::vector<std::uint32_t> df = {2, 5};
    const auto out = tfidf_transform({{1, 4.0}}, df, 10);
    ASSERT_EQ(out.size(), 1u);
    EXPECT_DOUBLE_EQ(out[0].value, 1.0);
    EXPECT_TRUE(tfidf_transform({}, df, 10).empty());
}

TEST(Engineered, AlwaysTwelveAndZeroForEmptyText) {
    const auto res = tiny_resources();
    const EngineeredResources er{PhraseMatcher(res.abbreviations), res.lexicon};
    const auto f = engineered_features(Instance{"x", "", {}, {}, {}}, er);
    ASSERT_EQ(f.size(), 12u);
    for (double v : f) EXPECT_EQ(v, 0.0);
}

TEST(Engineered, HandComputedExample) {
    const auto res = tiny_resources();
    const EngineeredResources er{PhraseMatcher(res.abbreviations), res.lexicon};
    Instance inst{"x", "10 things. #wow @you", DateTime{2015, 6, 9, 14, 0, 0, 0}, true, {}};
    const auto f = engineered_features(inst, er);
    auto at = [&](std::string_view name) {
        const auto it = std::find(kEngineeredNames.begin(), kEngineeredNames.end(), name);
        return f[static_cast<std::size_t>(it - kEngineeredNames.begin())];
    };
    EXPECT_EQ(at("starts_with_number"), 1.0);
    EXPECT_EQ(at("hash_count"), 1.0);
    EXPECT_EQ(at("at_count"), 1.0);
    EXPECT_EQ(at("dot_count"), 1.0);
    EXPECT_EQ(at("has_media"), 1.0);
    EXPECT_EQ(at("part_of_day"), 3.0);
    EXPECT_EQ(at("char_count"), 20.0);
    EXPECT_EQ(at("mean_word_length"), 4.0); // "10", "things"
    EXPECT_EQ(at("max_word_length"), 6.0);
    EXPECT_EQ(at("abbreviation_count"), 0.0);
    EXPECT_EQ(at("sentiment_polarity"), 0.0);
}

TEST(Engineered, PartOfDayBuckets) {
    EXPECT_EQ(part_of_day(std::nullopt), 0);
    EXPECT_EQ(part_of_day(DateTime{2015, 1, 1, 0, 0, 0, 0}), 1);
    EXPECT_EQ(part_of_day(DateTime{2015, 1, 1, 5, 59, 0, 0}), 1);
    EXPECT_EQ(part_of_day(DateTime{2015, 1, 1, 6, 0, 0, 0}), 2);
    EXPECT_EQ(part_of_day(DateTime{2015, 1, 1, 17, 0, 0, 0}), 3);
    EXPECT_EQ(part_of_day(DateTime{2015, 1, 1, 23, 0, 0, 0}), 4);
}

TEST(Engineered, AbbreviationsAndSentiment) {
    const auto res = tiny_resources();
    const EngineeredResources er{PhraseMatcher(res.abbreviations), res.lexicon};
    const auto f = engineered_features(Instance{"x", "OMG I love this", {}, {}, {}}, er);
    EXPECT_EQ(f[7], 1.0);
    EXPECT_NEAR(f[10], 3.2 / std::sqrt(3.2 * 3.2 + 15.0), 1e-15);
}

TEST(WordLists, OccurrenceCounts) {
    EXPECT_EQ(wordlist_features(tokenize("you will not believe"), {WordListResource{"l", {"you", "believe"}}}),
              std::vector<double>{2.0});
    EXPECT_EQ(wordlist_features(tokenize("the the the"), {WordListResource{"l", {"the"}}}), std::vector<double>{3.0});
    EXPECT_EQ(wordlist_features(tokenize("You will not believe it"), {WordListResource{"l", {"you will not believe"}}}),
              std::vector<double>{1.0});
    EXPECT_EQ(wordlist_features(tokenize("nothing"), {WordListResource{"l", {"you"}}}), std::vector<double>{0.0});
}

TEST(Extraction, NgramBlockHasUnitNorm) {
    const auto res = tiny_resources();
    const auto vocab = build_vocabulary(corpus(kPosts), res.word_lists);
    const auto x = extract_matrix(corpus(kPosts), vocab, res);
    ASSERT_EQ(x.rows(), kPosts.size());
    ASSERT_EQ(x.cols(), vocab.size());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        double norm2 = 0.0;
        const auto c = x.row_columns(r);
        const auto v = x.row_values(r);
        for (std::size_t k = 0; k < c.size(); ++k) {
            const auto cat = vocab[c[k]].category;
            if (cat == FeatureCategory::char_ngram || cat == FeatureCategory::word_ngram) norm2 += v[k] * v[k];
        }
        EXPECT_NEAR(norm2, 1.0, 1e-12) << "row " << r;
    }
}

TEST(Extraction, OutOfVocabularyRowKeepsEngineeredColumns) {
    const auto res = tiny_resources();
    const auto vocab = build_vocabulary(corpus(kPosts), res.word_lists);
    const FeatureExtractor ex(vocab, res);
    const auto row = ex.row(Instance{"q", "\xE2\x80\x94\xE2\x80\x94", {}, true, {}});
    for (const auto& e : row) {
        EXPECT_TRUE(vocab[e.column].category == FeatureCategory::engineered ||
                    vocab[e.column].category == FeatureCategory::wordlist);
    }
    const auto media = vocab.find(FeatureCategory::engineered, "has_media");
    EXPECT_TRUE(std::any_of(row.begin(), row.end(), [&](const auto& e) { return e.column == *media && e.value == 1.0; }));
}

TEST(Extraction, ResourceMismatchIsDetected) {
    const auto res = tiny_resources();
    const auto vocab = build_vocabulary(corpus(kPosts), res.word_lists);
    auto other = res;
    other.word_lists.pop_back();
    EXPECT_THROW(FeatureExtractor(vocab, other), DimensionError);
    other.word_lists.push_back({"renamed", {"x"}});
    EXPECT_THROW(FeatureExtractor(vocab, other), DimensionError);
}

TEST(Extraction, DeterministicAcrossCalls) {
    const auto res = tiny_resources();
    const auto vocab = build_vocabulary(corpus(kPosts), res.word_lists);
    std::stringstream a, b;
    extract_matrix(corpus(kPosts), vocab, res).write_binary(a, vocab.hash());
    extract_matrix(corpus(kPosts), vocab, res).write_binary(b, vocab.hash());
    EXPECT_EQ(a.str(), b.str());
}

TEST(Resources, BundledDirectoryLoads) {
    const auto res = load_resources(LMOFS_RESOURCES_DIR);
    EXPECT_GE(res.word_lists.size(), 1u);
    EXPECT_GT(res.lexicon.size(), 0u);
    EXPECT_FALSE(res.abbreviations.empty());
    EXPECT_TRUE(std::is_sorted(res.word_lists.begin(), res.word_lists.end(),
                               [](const auto& a, const auto& b) { return a.name < b.name; }));
}

TEST(Resources, MissingDirectoryNamesExpectedFiles) {
    try {
        load_resources("/nonexistent/lmofs");
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("sentiment_lexicon.tsv"), std::string::npos);
    }
}

TEST(Vocabulary, SingletonNgramsAreAllFiltered) {
    const auto vocab = build_vocabulary(corpus({"q"}), tiny_resources().word_lists);
    EXPECT_EQ(vocab.count(FeatureCategory::char_ngram), 0u);
    EXPECT_EQ(vocab.count(FeatureCategory::word_ngram), 0u);
    EXPECT_EQ(vocab.size(), kEngineeredCount + 2);
}

TEST(WordLists, EmptyTokensGiveZeros) {
    EXPECT_EQ(wordlist_features({}, tiny_resources().word_lists), (std::vector<double>{0.0, 0.0}));
}

TEST(Extraction, EmptyTextRowsHoldOnlyEngineeredAndListColumns) {
    const auto res = tiny_resources();
    const auto vocab = build_vocabulary(corpus(kPosts), res.word_lists);
    const auto x = extract_matrix(corpus({"", ""}), vocab, res);
    ASSERT_EQ(x.rows(), 2u);
    for (std::size_t r = 0; r < 2; ++r) {
        for (auto c : x.row_columns(r)) {
            EXPECT_TRUE(vocab[c].category == FeatureCategory::engineered ||
                        vocab[c].category == FeatureCategory::wordlist);
        }
    }
}

TEST(Extraction, TrainingFixtureMatchesHandBuiltMatrix) {
    const auto res = tiny_resources();
    const auto vocab = build_vocabulary(corpus(kPosts), res.word_lists);
    const auto x = extract_matrix(corpus(kPosts), vocab, res);
    const auto oc = oracle_count(kPosts);
    const double n = static_cast<double>(kPosts.size());
    for (std::size_t d = 0; d < kPosts.size(); ++d) {
        const auto local = oracle_count({kPosts[d]});
        std::map<ColumnId, double> expected;
        double norm2 = 0.0;
        auto add = [&](FeatureCategory cat, const auto& mine, const auto& global) {
            for (const auto& [g, c] : mine) {
                if (global.at(g).first < 3) continue;
                const double v = static_cast<double>(c.first) * (std::log((1.0 + n) / (1.0 + global.at(g).second)) + 1.0);
                expected[*vocab.find(cat, g)] = v;
                norm2 += v * v;
            }
        };
        add(FeatureCategory::char_ngram, local.chars, oc.chars);
        add(FeatureCategory::word_ngram, local.words, oc.words);
        for (auto& [c, v] : expected) v /= std::sqrt(norm2);
        const auto toks = oracle_tokens(kPosts[d]);
        const double pronouns = static_cast<double>(std::count(toks.begin(), toks.end(), "you"));
        expected[*vocab.find(FeatureCategory::wordlist, "pronouns")] = pronouns;
        for (std::size_t j = 0; j < vocab.size(); ++j) {
            if (vocab[j].category == FeatureCategory::engineered) continue;
            if (vocab[j].name == "teasers") continue;
            const auto it = expected.find(static_cast<ColumnId>(j));
            EXPECT_NEAR(x.at(d, j), it == expected.end() ? 0.0 : it->second, 1e-12) << d << " " << vocab[j].name;
        }
    }
}
