#pragma once

// Lexical resources: word lists, the abbreviation list and the sentiment
// lexicon, loaded from a resources directory.
//
//   <dir>/abbreviations.txt       one abbreviation per line
//   <dir>/sentiment_lexicon.tsv   token<TAB>valence[<TAB>...]
//   <dir>/wordlists/<name>.txt    one word or phrase per line; one feature per file
//
// Lines starting with '#' and blank lines are ignored; entries are lowercased.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "error.hpp"
#include "text.hpp"

namespace lmofs {

struct WordListResource {
    std::string name;
    std::set<std::string> entries; ///< lowercase words or phrases
};

/// Counts occurrences of any list entry in a token sequence. Entries are
/// tokenized with the tweet tokenizer so phrases match as token subsequences;
/// every matching start position of every entry counts once.
class PhraseMatcher {
public:
    PhraseMatcher() = default;
    explicit PhraseMatcher(const std::set<std::string>& entries) {
        for (const auto& e : entries) {
            auto toks = tokenize(e);
            if (toks.empty()) continue;
            by_first_.emplace(toks.front(), std::move(toks));
        }
    }

    std::size_t count(const std::vector<std::string>& tokens) const {
        std::size_t hits = 0;
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            const auto [lo, hi] = by_first_.equal_range(tokens[i]);
            for (auto it = lo; it != hi; ++it) {
                const auto& phrase = it->second;
                if (i + phrase.size() > tokens.size()) continue;
                if (std::equal(phrase.begin(), phrase.end(), tokens.begin() + static_cast<std::ptrdiff_t>(i))) ++hits;
            }
        }
        return hits;
    }

private:
    std::multimap<std::string, std::vector<std::string>> by_first_;
};

namespace detail {

inline std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> read_entry_lines(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open resource '" + path.string() + "'");
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        lines.push_back(utf8::lower(line));
    }
    return lines;
}

} // namespace detail

inline WordListResource load_word_list(const std::filesystem::path& path, std::string name = {}) {
    WordListResource list;
    list.name = name.empty() ? path.stem().string() : std::move(name);
    for (auto& e : detail::read_entry_lines(path)) list.entries.insert(std::move(e));
    if (list.entries.empty()) throw Error("word list '" + path.string() + "' is empty");
    return list;
}

inline SentimentLexicon load_sentiment_lexicon(const std::filesystem::path& path) {
    std::unordered_map<std::string, double> valence;
    for (const auto& line : detail::read_entry_lines(path)) {
        const auto tab = line.find('\t');
        if (tab == std::string::npos) throw ParseError(path.string() + ": expected token<TAB>valence in '" + line + "'");
        const auto rest = line.substr(tab + 1);
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(rest, &used);
        } catch (const std::exception&) {
            throw ParseError(path.string() + ": bad valence in '" + line + "'");
        }
        valence[line.substr(0, tab)] = v;
    }
    return SentimentLexicon(std::move(valence));
}

/// Everything the feature extractor reads from disk besides the corpus.
struct ResourceBundle {
    std::vector<WordListResource> word_lists; ///< sorted by name
    std::set<std::string> abbreviations;
    SentimentLexicon lexicon;
};

inline ResourceBundle load_resources(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    const fs::path abbrev = dir / "abbreviations.txt";
    const fs::path lexicon = dir / "sentiment_lexicon.tsv";
    const fs::path lists = dir / "wordlists";

    std::vector<fs::path> list_files;
    if (fs::is_directory(lists)) {
        for (const auto& e : fs::directory_iterator(lists)) {
            if (e.is_regular_file() && e.path().extension() == ".txt") list_files.push_back(e.path());
        }
    }
    if (!fs::is_directory(dir) || !fs::is_regular_file(abbrev) || !fs::is_regular_file(lexicon) ||
        list_files.empty()) {
        throw Error("resources directory '" + dir.string() +
                    "' is incomplete; expected files: abbreviations.txt, sentiment_lexicon.tsv, "
                    "wordlists/<name>.txt (at least one)");
    }
    std::sort(list_files.begin(), list_files.end());

    ResourceBundle bundle;
    for (const auto& f : list_files) bundle.word_lists.push_back(load_word_list(f));
    for (auto& e : detail::read_entry_lines(abbrev)) bundle.abbreviations.insert(std::move(e));
    bundle.lexicon = load_sentiment_lexicon(lexicon);
    return bundle;
}

} // namespace lmofs
