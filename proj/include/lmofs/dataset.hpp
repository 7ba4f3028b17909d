#pragma once

// Labeled short-text corpora: JSON-lines ingestion and seeded splits.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "random.hpp"

namespace lmofs {

/// Wall-clock datetime as written in the source, with its UTC offset.
struct DateTime {
    int year = 1970;
    int month = 1;
    int day = 1;
    int hour = 0;
    int minute = 0;
    int second = 0;
    int utc_offset_minutes = 0;

    friend bool operator==(const DateTime&, const DateTime&) = default;
};

namespace detail {

inline bool parse_int(std::string_view s, int& out) {
    if (s.empty()) return false;
    int v = 0;
    for (char c : s) {
        if (c < '0' || c > '9') return false;
        v = v * 10 + (c - '0');
    }
    out = v;
    return true;
}

inline bool valid_clock(const DateTime& t) {
    return t.month >= 1 && t.month <= 12 && t.day >= 1 && t.day <= 31 && t.hour >= 0 && t.hour <= 23 &&
           t.minute >= 0 && t.minute <= 59 && t.second >= 0 && t.second <= 60;
}

// "+0000", "+02:00", "-0530"
inline bool parse_offset(std::string_view s, int& minutes) {
    if (s.size() < 5 || (s[0] != '+' && s[0] != '-')) return false;
    const int sign = s[0] == '-' ? -1 : 1;
    std::string digits;
    for (char c : s.substr(1)) {
        if (c != ':') digits.push_back(c);
    }
    int hh = 0, mm = 0;
    if (digits.size() != 4 || !parse_int(std::string_view(digits).substr(0, 2), hh) ||
        !parse_int(std::string_view(digits).substr(2, 2), mm)) {
        return false;
    }
    minutes = sign * (hh * 60 + mm);
    return true;
}

} // namespace detail

/// Accepts ISO-8601 ("2015-06-09T16:31:10Z", "2015-06-09 16:31:10+02:00",
/// offset optional) and the Twitter form "Tue Jun 09 16:31:10 +0000 2015".
inline std::optional<DateTime> parse_datetime(std::string_view s) {
    DateTime t;
    if (s.size() >= 19 && s[4] == '-' && s[7] == '-' && (s[10] == 'T' || s[10] == ' ') && s[13] == ':' &&
        s[16] == ':') {
        if (!detail::parse_int(s.substr(0, 4), t.year) || !detail::parse_int(s.substr(5, 2), t.month) ||
            !detail::parse_int(s.substr(8, 2), t.day) || !detail::parse_int(s.substr(11, 2), t.hour) ||
            !detail::parse_int(s.substr(14, 2), t.minute) || !detail::parse_int(s.substr(17, 2), t.second)) {
            return std::nullopt;
        }
        auto rest = s.substr(19);
        if (!rest.empty() && rest[0] == '.') {
            std::size_t k = 1;
            while (k < rest.size() && rest[k] >= '0' && rest[k] <= '9') ++k;
            rest = rest.substr(k);
        }
        if (rest == "Z" || rest.empty()) {
            t.utc_offset_minutes = 0;
        } else if (!detail::parse_offset(rest, t.utc_offset_minutes)) {
            return std::nullopt;
        }
        if (!detail::valid_clock(t)) return std::nullopt;
        return t;
    }

    static constexpr const char* months[] = {"Jan", "Feb", "Mar", "Apr", "May", "Jun",
                                             "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};
    std::istringstream in{std::string(s)};
    std::string dow, mon, day, clock, offset, year;
    if (!(in >> dow >> mon >> day >> clock >> offset >> year)) return std::nullopt;
    const auto* it = std::find_if(std::begin(months), std::end(months), [&](const char* m) { return mon == m; });
    if (it == std::end(months) || clock.size() != 8 || clock[2] != ':' || clock[5] != ':') return std::nullopt;
    t.month = static_cast<int>(it - std::begin(months)) + 1;
    const std::string_view cv = clock;
    if (!detail::parse_int(day, t.day) || !detail::parse_int(year, t.year) ||
        !detail::parse_int(cv.substr(0, 2), t.hour) || !detail::parse_int(cv.substr(3, 2), t.minute) ||
        !detail::parse_int(cv.substr(6, 2), t.second) || !detail::parse_offset(offset, t.utc_offset_minutes)) {
        return std::nullopt;
    }
    if (!detail::valid_clock(t)) return std::nullopt;
    return t;
}

inline std::string format_iso8601(const DateTime& t) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d", t.year, t.month, t.day, t.hour, t.minute,
                  t.second);
    std::string out = buf;
    if (t.utc_offset_minutes == 0) {
        out += 'Z';
    } else {
        const int m = std::abs(t.utc_offset_minutes);
        std::snprintf(buf, sizeof buf, "%c%02d:%02d", t.utc_offset_minutes < 0 ? '-' : '+', m / 60, m % 60);
        out += buf;
    }
    return out;
}

struct Instance {
    std::string id;
    std::string text;
    std::optional<DateTime> timestamp;
    std::optional<bool> has_media;
    std::optional<double> label; ///< mean clickbaitiness judgment in [0,1]

    friend bool operator==(const Instance&, const Instance&) = default;
};

struct Dataset {
    std::vector<Instance> instances; ///< file order
    std::string provenance;

    std::size_t size() const { return instances.size(); }
    bool empty() const { return instances.empty(); }

    /// Labels in row order; throws if any instance is unlabeled.
    std::vector<double> labels() const {
        std::vector<double> y;
        y.reserve(instances.size());
        for (const auto& inst : instances) {
            if (!inst.label) throw Error("instance '" + inst.id + "' has no label");
            y.push_back(*inst.label);
        }
        return y;
    }
};

enum class DatasetSchema { challenge_jsonl, simple_jsonl };

struct SplitSpec {
    double train_fraction = 0.7;
    Seed seed = 0;
};

namespace detail {

using nlohmann::json;

template <typename Fn>
void for_each_json_line(const std::string& path, Fn&& fn) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path + "'");
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": malformed JSON: " + e.what());
        }
        if (!obj.is_object()) throw ParseError(path + ":" + std::to_string(line_no) + ": expected a JSON object");
        try {
            fn(obj, line_no);
        } catch (const json::exception& e) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
}

inline std::string where(const std::string& path, std::size_t line_no) {
    return path + ":" + std::to_string(line_no);
}

inline std::string id_of(const json& obj, const std::string& path, std::size_t line_no) {
    if (!obj.contains("id")) throw ParseError(where(path, line_no) + ": missing 'id'");
    const auto& v = obj.at("id");
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    throw ParseError(where(path, line_no) + ": 'id' must be a string");
}

inline double checked_label(const json& v, const std::string& path, std::size_t line_no) {
    if (!v.is_number()) throw ParseError(where(path, line_no) + ": label must be a number");
    const double x = v.get<double>();
    if (!std::isfinite(x) || x < 0.0 || x > 1.0) {
        throw ParseError(where(path, line_no) + ": label " + std::to_string(x) + " outside [0,1]");
    }
    return x;
}

inline std::optional<DateTime> checked_timestamp(const json& obj, const char* key, const std::string& path,
                                                 std::size_t line_no) {
    if (!obj.contains(key) || obj.at(key).is_null()) return std::nullopt;
    const auto raw = obj.at(key).get<std::string>();
    auto t = parse_datetime(raw);
    if (!t) throw ParseError(where(path, line_no) + ": unparseable timestamp '" + raw + "'");
    return t;
}

} // namespace detail

/// simple_jsonl: one object per line with id, text, timestamp?, has_media?, label?.
inline Dataset load_simple_jsonl(const std::string& path) {
    Dataset ds;
    ds.provenance = path;
    std::unordered_set<std::string> seen;
    detail::for_each_json_line(path, [&](const detail::json& obj, std::size_t line_no) {
        Instance inst;
        inst.id = detail::id_of(obj, path, line_no);
        if (!seen.insert(inst.id).second) {
            throw Error(detail::where(path, line_no) + ": duplicate id '" + inst.id + "'");
        }
        inst.text = obj.value("text", std::string{});
        inst.timestamp = detail::checked_timestamp(obj, "timestamp", path, line_no);
        if (obj.contains("has_media") && !obj.at("has_media").is_null()) {
            inst.has_media = obj.at("has_media").get<bool>();
        }
        if (obj.contains("label") && !obj.at("label").is_null()) {
            inst.label = detail::checked_label(obj.at("label"), path, line_no);
        }
        ds.instances.push_back(std::move(inst));
    });
    return ds;
}

/// Challenge layout: instances file (id, postText[], postTimestamp, postMedia[])
/// plus an optional truth file (id, truthMean) joined on id.
inline Dataset load_challenge_jsonl(const std::string& instances_path, const std::string& truth_path = {}) {
    Dataset ds;
    ds.provenance = instances_path;
    std::unordered_map<std::string, std::size_t> row_of;
    detail::for_each_json_line(instances_path, [&](const detail::json& obj, std::size_t line_no) {
        Instance inst;
        inst.id = detail::id_of(obj, instances_path, line_no);
        if (row_of.count(inst.id)) {
            throw Error(detail::where(instances_path, line_no) + ": duplicate id '" + inst.id + "'");
        }
        if (obj.contains("postText")) {
            const auto& pt = obj.at("postText");
            if (pt.is_array()) {
                for (std::size_t k = 0; k < pt.size(); ++k) {
                    if (k) inst.text += ' ';
                    inst.text += pt.at(k).get<std::string>();
                }
            } else if (pt.is_string()) {
                inst.text = pt.get<std::string>();
            }
        }
        inst.timestamp = detail::checked_timestamp(obj, "postTimestamp", instances_path, line_no);
        if (obj.contains("postMedia") && !obj.at("postMedia").is_null()) {
            const auto& pm = obj.at("postMedia");
            inst.has_media = pm.is_array() ? !pm.empty() : pm.get<bool>();
        }
        row_of.emplace(inst.id, ds.instances.size());
        ds.instances.push_back(std::move(inst));
    });
    if (truth_path.empty()) return ds;

    std::unordered_set<std::string> labeled;
    detail::for_each_json_line(truth_path, [&](const detail::json& obj, std::size_t line_no) {
        const auto id = detail::id_of(obj, truth_path, line_no);
        const auto it = row_of.find(id);
        if (it == row_of.end()) {
            throw Error(detail::where(truth_path, line_no) + ": truth record '" + id + "' has no matching instance");
        }
        if (!labeled.insert(id).second) {
            throw Error(detail::where(truth_path, line_no) + ": duplicate truth record '" + id + "'");
        }
        if (!obj.contains("truthMean")) throw ParseError(detail::where(truth_path, line_no) + ": missing 'truthMean'");
        ds.instances[it->second].label = detail::checked_label(obj.at("truthMean"), truth_path, line_no);
    });
    return ds;
}

/// For challenge_jsonl, `path` names the instances file and `truth_path` the
/// optional truth file; simple_jsonl ignores `truth_path`.
inline Dataset load_dataset(const std::string& path, DatasetSchema schema, const std::string& truth_path = {}) {
    return schema == DatasetSchema::simple_jsonl ? load_simple_jsonl(path) : load_challenge_jsonl(path, truth_path);
}

inline void write_simple_jsonl(const Dataset& ds, std::ostream& out) {
    for (const auto& inst : ds.instances) {
        nlohmann::ordered_json obj;
        obj["id"] = inst.id;
        obj["text"] = inst.text;
        if (inst.timestamp) obj["timestamp"] = format_iso8601(*inst.timestamp);
        if (inst.has_media) obj["has_media"] = *inst.has_media;
        if (inst.label) obj["label"] = *inst.label;
        out << obj.dump() << '\n';
    }
}

/// Size of the train side: ceil(fraction * n), guarded against representation
/// error so that 0.7 * 10 yields 7.
inline std::size_t train_size(std::size_t n, double train_fraction) {
    const double exact = train_fraction * static_cast<double>(n);
    return static_cast<std::size_t>(std::ceil(exact - 1e-9));
}

/// Seeded uniform shuffle of 0..n-1; first ceil(fraction*n) go to train.
/// Both sides are returned in ascending index order.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n,
                                                                                   const SplitSpec& spec) {
    if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
        throw Error("train_fraction must lie in (0,1)");
    }
    const std::size_t n_train = train_size(n, spec.train_fraction);
    if (n_train == 0 || n_train >= n) {
        throw Error("split of " + std::to_string(n) + " instances at fraction " + std::to_string(spec.train_fraction) +
                    " leaves one side empty");
    }
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(spec.seed);
    shuffle(std::span<std::size_t>(order), rng);
    std::vector<std::size_t> train(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::vector<std::size_t> validation(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
    std::sort(train.begin(), train.end());
    std::sort(validation.begin(), validation.end());
    return {std::move(train), std::move(validation)};
}

inline Dataset subset(const Dataset& ds, const std::vector<std::size_t>& rows) {
    Dataset out;
    out.provenance = ds.provenance;
    out.instances.reserve(rows.size());
    for (auto r : rows) out.instances.push_back(ds.instances.at(r));
    return out;
}

inline std::pair<Dataset, Dataset> split(const Dataset& ds, const SplitSpec& spec) {
    if (ds.empty()) throw Error("cannot split an empty dataset");
    auto [train, validation] = split_indices(ds.size(), spec);
    return {subset(ds, train), subset(ds, validation)};
}

} // namespace lmofs
