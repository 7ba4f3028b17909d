#pragma once

// Tweet tokenization and the text statistics the engineered features need.

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "utf8.hpp"

namespace lmofs {

enum class TokenKind { word, mention, hashtag, url, emoticon, punctuation };

struct Token {
    std::string text; ///< lowercased UTF-8
    TokenKind kind;
};

namespace detail {

// Lowercased ASCII emoticons, longest first so ":-)" wins over ":-".
inline constexpr std::array<std::u32string_view, 22> kEmoticons = {
    U":'-(", U":'-)", U">:-(", U":-)", U":-(", U":-d", U":-p", U";-)", U":-/", U":-o", U":'(",
    U":')",  U">:(",  U":)",   U":(",  U":d",  U":p",  U";)",  U":/",  U":o",  U"<3",  U":|"};

inline bool starts_with(const std::u32string& s, std::size_t pos, std::u32string_view prefix) {
    return s.size() - pos >= prefix.size() && std::u32string_view(s).substr(pos, prefix.size()) == prefix;
}

inline bool is_apostrophe(char32_t cp) { return cp == U'\'' || cp == 0x2019; }

} // namespace detail

/// Rule-based tweet tokenizer. Lowercases; keeps @mentions, #hashtags, URLs,
/// emoticons and emoji runs whole; every other non-word codepoint is its own
/// token. Internal apostrophes stay inside words ("don't").
inline std::vector<Token> tokenize_detailed(std::string_view text) {
    auto cps = utf8::decode(text);
    for (auto& cp : cps) cp = utf8::to_lower(cp);

    std::vector<Token> tokens;
    const std::size_t n = cps.size();
    std::size_t i = 0;
    auto emit = [&](std::size_t begin, std::size_t end, TokenKind kind) {
        tokens.push_back({utf8::encode(std::u32string_view(cps).substr(begin, end - begin)), kind});
    };

    while (i < n) {
        const char32_t c = cps[i];
        if (utf8::is_space(c)) {
            ++i;
            continue;
        }
        if (detail::starts_with(cps, i, U"http://") || detail::starts_with(cps, i, U"https://") ||
            detail::starts_with(cps, i, U"www.")) {
            std::size_t j = i;
            while (j < n && !utf8::is_space(cps[j])) ++j;
            emit(i, j, TokenKind::url);
            i = j;
            continue;
        }
        if ((c == U'@' || c == U'#') && i + 1 < n && utf8::is_word_char(cps[i + 1])) {
            std::size_t j = i + 1;
            while (j < n && utf8::is_word_char(cps[j])) ++j;
            emit(i, j, c == U'@' ? TokenKind::mention : TokenKind::hashtag);
            i = j;
            continue;
        }
        if (utf8::is_emoji(c)) {
            std::size_t j = i;
            while (j < n && (utf8::is_emoji(cps[j]) || (cps[j] >= 0x1F3FB && cps[j] <= 0x1F3FF))) ++j;
            emit(i, j, TokenKind::emoticon);
            i = j;
            continue;
        }
        if (utf8::is_word_char(c)) {
            std::size_t j = i;
            while (j < n) {
                if (utf8::is_word_char(cps[j])) {
                    ++j;
                } else if (detail::is_apostrophe(cps[j]) && j + 1 < n && utf8::is_word_char(cps[j + 1])) {
                    j += 2;
                } else {
                    break;
                }
            }
            emit(i, j, TokenKind::word);
            i = j;
            continue;
        }
        bool matched = false;
        for (auto emo : detail::kEmoticons) {
            if (detail::starts_with(cps, i, emo)) {
                const std::size_t j = i + emo.size();
                // ":d" inside ":dog" is punctuation followed by a word
                if (j < n && utf8::is_ascii_alnum(cps[j]) && utf8::is_ascii_alnum(cps[j - 1])) continue;
                emit(i, j, TokenKind::emoticon);
                i = j;
                matched = true;
                break;
            }
        }
        if (matched) continue;
        emit(i, i + 1, TokenKind::punctuation);
        ++i;
    }
    return tokens;
}

inline std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    for (auto& t : tokenize_detailed(text)) out.push_back(std::move(t.text));
    return out;
}

/// Lowercased text with every whitespace run collapsed to one space and the
/// ends trimmed; the basis for character n-grams.
inline std::u32string normalize_for_char_ngrams(std::string_view text) {
    const auto cps = utf8::decode(text);
    std::u32string out;
    out.reserve(cps.size());
    bool pending_space = false;
    for (char32_t cp : cps) {
        if (utf8::is_space(cp)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out.push_back(U' ');
        pending_space = false;
        out.push_back(utf8::to_lower(cp));
    }
    return out;
}

/// Sliding-window character n-grams (by codepoint) for each requested n.
/// Returned as a list with repetitions, window order, n ascending.
inline std::vector<std::string> char_ngrams(std::string_view text, std::initializer_list<int> n_values = {1, 2, 3}) {
    const auto cps = normalize_for_char_ngrams(text);
    std::vector<std::string> grams;
    for (int n : n_values) {
        const auto len = static_cast<std::size_t>(n);
        if (len == 0 || cps.size() < len) continue;
        for (std::size_t i = 0; i + len <= cps.size(); ++i) {
            grams.push_back(utf8::encode(std::u32string_view(cps).substr(i, len)));
        }
    }
    return grams;
}

/// Word n-grams, tokens joined by a single space.
inline std::vector<std::string> word_ngrams(const std::vector<std::string>& tokens,
                                            std::initializer_list<int> n_values = {1, 2, 3}) {
    std::vector<std::string> grams;
    for (int n : n_values) {
        const auto len = static_cast<std::size_t>(n);
        if (len == 0 || tokens.size() < len) continue;
        for (std::size_t i = 0; i + len <= tokens.size(); ++i) {
            std::string g = tokens[i];
            for (std::size_t k = 1; k < len; ++k) {
                g += ' ';
                g += tokens[i + k];
            }
            grams.push_back(std::move(g));
        }
    }
    return grams;
}

/// Vowel-group syllable estimate: groups of [aeiouy], minus a silent final
/// 'e' (not after 'l'), at least 1.
inline int count_syllables(std::string_view word) {
    auto is_vowel = [](char c) { return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u' || c == 'y'; };
    std::string w;
    for (char c : word) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c + 32);
        if (c >= 'a' && c <= 'z') w.push_back(c);
    }
    int groups = 0;
    bool prev_vowel = false;
    for (char c : w) {
        const bool v = is_vowel(c);
        if (v && !prev_vowel) ++groups;
        prev_vowel = v;
    }
    if (w.size() > 2 && w.back() == 'e' && !is_vowel(w[w.size() - 2]) && w[w.size() - 2] != 'l' && groups > 1) {
        --groups;
    }
    return groups < 1 ? 1 : groups;
}

/// Number of maximal runs of '.', '!' or '?'.
inline int count_sentence_terminators(std::string_view text) {
    int runs = 0;
    bool in_run = false;
    for (char c : text) {
        const bool t = c == '.' || c == '!' || c == '?';
        if (t && !in_run) ++runs;
        in_run = t;
    }
    return runs;
}

/// Flesch-Kincaid grade level over the word tokens of `text`:
/// 0.39 * words/sentences + 11.8 * syllables/words - 15.59, with
/// sentences = max(1, terminator runs). No words -> 0.
inline double flesch_kincaid_grade(std::string_view text) {
    int words = 0;
    int syllables = 0;
    for (const auto& tok : tokenize_detailed(text)) {
        if (tok.kind != TokenKind::word) continue;
        ++words;
        syllables += count_syllables(tok.text);
    }
    if (words == 0) return 0.0;
    const int sentences = std::max(1, count_sentence_terminators(text));
    return 0.39 * static_cast<double>(words) / sentences + 11.8 * static_cast<double>(syllables) / words - 15.59;
}

/// Token -> valence lexicon (VADER-style, roughly -4..+4).
class SentimentLexicon {
public:
    SentimentLexicon() = default;
    explicit SentimentLexicon(std::unordered_map<std::string, double> valence) : valence_(std::move(valence)) {}

    std::size_t size() const { return valence_.size(); }

    double valence(const std::string& token) const {
        const auto it = valence_.find(token);
        return it == valence_.end() ? 0.0 : it->second;
    }

    /// s / sqrt(s^2 + 15), where s sums token valences and a token directly
    /// after not/no/never/*n't contributes with flipped sign.
    double polarity(const std::vector<std::string>& tokens) const {
        double s = 0.0;
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            double v = valence(tokens[i]);
            if (v != 0.0 && i > 0 && is_negator(tokens[i - 1])) v = -v;
            s += v;
        }
        return s / std::sqrt(s * s + 15.0);
    }

    static bool is_negator(std::string_view tok) {
        if (tok == "not" || tok == "no" || tok == "never" || tok == "n't") return true;
        return tok.size() > 3 && (tok.ends_with("n't") || tok.ends_with("n\xE2\x80\x99t"));
    }

private:
    std::unordered_map<std::string, double> valence_;
};

} // namespace lmofs
