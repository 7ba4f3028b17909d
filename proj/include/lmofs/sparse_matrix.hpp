#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "error.hpp"

namespace lmofs {

using ColumnId = std::uint32_t;

/// Fixed-size bit set over feature columns; bit i set means column i is active.
class FeatureMask {
public:
    FeatureMask() = default;
    explicit FeatureMask(std::size_t size, bool value = false)
        : size_(size), words_((size + 63) / 64, value ? ~std::uint64_t{0} : 0) {
        trim();
    }

    static FeatureMask all(std::size_t size) { return FeatureMask(size, true); }

    template <typename Range>
    static FeatureMask from_columns(std::size_t size, const Range& columns) {
        FeatureMask m(size);
        for (auto c : columns) m.set(static_cast<std::size_t>(c));
        return m;
    }

    std::size_t size() const { return size_; }

    bool test(std::size_t i) const { return (words_[i / 64] >> (i % 64)) & 1U; }

    void set(std::size_t i, bool value = true) {
        if (i >= size_) throw DimensionError("mask index " + std::to_string(i) + " out of range");
        const auto bit = std::uint64_t{1} << (i % 64);
        if (value) {
            words_[i / 64] |= bit;
        } else {
            words_[i / 64] &= ~bit;
        }
    }

    void reset(std::size_t i) { set(i, false); }

    std::size_t count() const {
        std::size_t c = 0;
        for (auto w : words_) c += static_cast<std::size_t>(std::popcount(w));
        return c;
    }

    bool is_subset_of(const FeatureMask& other) const {
        if (other.size_ != size_) return false;
        for (std::size_t k = 0; k < words_.size(); ++k) {
            if (words_[k] & ~other.words_[k]) return false;
        }
        return true;
    }

    std::vector<ColumnId> columns() const {
        std::vector<ColumnId> out;
        out.reserve(count());
        for (std::size_t i = 0; i < size_; ++i) {
            if (test(i)) out.push_back(static_cast<ColumnId>(i));
        }
        return out;
    }

    friend bool operator==(const FeatureMask&, const FeatureMask&) = default;

private:
    void trim() {
        if (size_ % 64 != 0 && !words_.empty()) words_.back() &= (std::uint64_t{1} << (size_ % 64)) - 1;
    }

    std::size_t size_ = 0;
    std::vector<std::uint64_t> words_;
};

struct SparseEntry {
    ColumnId column;
    double value;
};

/// Row-major compressed sparse matrix. Each row's entries are sorted by column;
/// explicit zeros are never stored.
class SparseMatrix {
public:
    SparseMatrix() : row_ptr_{0} {}
    SparseMatrix(std::size_t rows, std::size_t cols) : cols_(cols), row_ptr_(rows + 1, 0) {}

    std::size_t rows() const { return row_ptr_.size() - 1; }
    std::size_t cols() const { return cols_; }
    std::size_t nnz() const { return values_.size(); }

    /// Appends a row. Entries need not be sorted; zeros are dropped, duplicate
    /// columns are an error, non-finite values are an error.
    void push_row(std::vector<SparseEntry> entries) {
        std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.column < b.column; });
        for (std::size_t k = 0; k < entries.size(); ++k) {
            const auto& e = entries[k];
            if (e.column >= cols_) throw DimensionError("column " + std::to_string(e.column) + " out of range");
            if (k > 0 && entries[k - 1].column == e.column) {
                throw DimensionError("duplicate column " + std::to_string(e.column) + " in row");
            }
            if (!std::isfinite(e.value)) throw Error("non-finite matrix value");
            if (e.value == 0.0) continue;
            col_idx_.push_back(e.column);
            values_.push_back(e.value);
        }
        row_ptr_.push_back(values_.size());
    }

    static SparseMatrix from_dense(const std::vector<std::vector<double>>& dense, std::size_t cols) {
        SparseMatrix m;
        m.cols_ = cols;
        for (const auto& row : dense) {
            if (row.size() != cols) throw DimensionError("ragged dense input");
            std::vector<SparseEntry> entries;
            for (std::size_t j = 0; j < cols; ++j) entries.push_back({static_cast<ColumnId>(j), row[j]});
            m.push_row(std::move(entries));
        }
        return m;
    }

    std::span<const ColumnId> row_columns(std::size_t r) const {
        return {col_idx_.data() + row_ptr_[r], row_ptr_[r + 1] - row_ptr_[r]};
    }
    std::span<const double> row_values(std::size_t r) const {
        return {values_.data() + row_ptr_[r], row_ptr_[r + 1] - row_ptr_[r]};
    }

    double at(std::size_t r, std::size_t c) const {
        const auto cols = row_columns(r);
        const auto it = std::lower_bound(cols.begin(), cols.end(), static_cast<ColumnId>(c));
        if (it == cols.end() || *it != c) return 0.0;
        return row_values(r)[static_cast<std::size_t>(it - cols.begin())];
    }

    std::vector<std::vector<double>> to_dense() const {
        std::vector<std::vector<double>> out(rows(), std::vector<double>(cols_, 0.0));
        for (std::size_t r = 0; r < rows(); ++r) {
            const auto c = row_columns(r);
            const auto v = row_values(r);
            for (std::size_t k = 0; k < c.size(); ++k) out[r][c[k]] = v[k];
        }
        return out;
    }

    /// Rows in the given order (duplicates allowed).
    SparseMatrix select_rows(std::span<const std::size_t> rows) const {
        SparseMatrix out;
        out.cols_ = cols_;
        out.row_ptr_.reserve(rows.size() + 1);
        for (auto r : rows) {
            if (r >= this->rows()) throw DimensionError("row " + std::to_string(r) + " out of range");
            const auto c = row_columns(r);
            const auto v = row_values(r);
            out.col_idx_.insert(out.col_idx_.end(), c.begin(), c.end());
            out.values_.insert(out.values_.end(), v.begin(), v.end());
            out.row_ptr_.push_back(out.values_.size());
        }
        return out;
    }

    /// Keeps only masked columns, renumbered densely in ascending order.
    SparseMatrix select_columns(const FeatureMask& mask) const {
        if (mask.size() != cols_) throw DimensionError("mask size does not match column count");
        std::vector<ColumnId> remap(cols_, 0);
        ColumnId next = 0;
        for (std::size_t j = 0; j < cols_; ++j) {
            if (mask.test(j)) remap[j] = next++;
        }
        SparseMatrix out;
        out.cols_ = next;
        for (std::size_t r = 0; r < rows(); ++r) {
            const auto c = row_columns(r);
            const auto v = row_values(r);
            for (std::size_t k = 0; k < c.size(); ++k) {
                if (!mask.test(c[k])) continue;
                out.col_idx_.push_back(remap[c[k]]);
                out.values_.push_back(v[k]);
            }
            out.row_ptr_.push_back(out.values_.size());
        }
        return out;
    }

    friend bool operator==(const SparseMatrix&, const SparseMatrix&) = default;

    // Binary cache layout (little-endian), version 1:
    //   magic "LMOFSMX\0" | u32 version | u64 rows | u64 cols | u64 vocabulary_hash | u64 nnz
    //   | u64 row_ptr[rows+1] | u32 col[nnz] | f64 value[nnz]
    static constexpr char kMagic[8] = {'L', 'M', 'O', 'F', 'S', 'M', 'X', '\0'};
    static constexpr std::uint32_t kFormatVersion = 1;

    void write_binary(std::ostream& out, std::uint64_t vocabulary_hash) const {
        static_assert(std::endian::native == std::endian::little, "cache format is little-endian");
        out.write(kMagic, sizeof kMagic);
        put(out, kFormatVersion);
        put(out, static_cast<std::uint64_t>(rows()));
        put(out, static_cast<std::uint64_t>(cols_));
        put(out, vocabulary_hash);
        put(out, static_cast<std::uint64_t>(nnz()));
        for (auto p : row_ptr_) put(out, static_cast<std::uint64_t>(p));
        out.write(reinterpret_cast<const char*>(col_idx_.data()),
                  static_cast<std::streamsize>(col_idx_.size() * sizeof(ColumnId)));
        out.write(reinterpret_cast<const char*>(values_.data()),
                  static_cast<std::streamsize>(values_.size() * sizeof(double)));
        if (!out) throw Error("failed writing matrix cache");
    }

    /// Returns the matrix and the vocabulary hash recorded in the header.
    static std::pair<SparseMatrix, std::uint64_t> read_binary(std::istream& in) {
        char magic[8];
        in.read(magic, sizeof magic);
        if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0) throw ParseError("not a matrix cache file");
        if (get<std::uint32_t>(in) != kFormatVersion) throw ParseError("unsupported matrix cache version");
        const auto rows = get<std::uint64_t>(in);
        const auto cols = get<std::uint64_t>(in);
        const auto hash = get<std::uint64_t>(in);
        const auto nnz = get<std::uint64_t>(in);
        SparseMatrix m;
        m.cols_ = cols;
        m.row_ptr_.resize(rows + 1);
        for (auto& p : m.row_ptr_) p = get<std::uint64_t>(in);
        m.col_idx_.resize(nnz);
        m.values_.resize(nnz);
        in.read(reinterpret_cast<char*>(m.col_idx_.data()), static_cast<std::streamsize>(nnz * sizeof(ColumnId)));
        in.read(reinterpret_cast<char*>(m.values_.data()), static_cast<std::streamsize>(nnz * sizeof(double)));
        if (!in) throw ParseError("truncated matrix cache");
        if (m.row_ptr_.front() != 0 || m.row_ptr_.back() != nnz) throw ParseError("corrupt matrix cache row pointers");
        for (std::size_t r = 0; r < rows; ++r) {
            if (m.row_ptr_[r] > m.row_ptr_[r + 1]) throw ParseError("corrupt matrix cache row pointers");
            for (auto k = m.row_ptr_[r]; k < m.row_ptr_[r + 1]; ++k) {
                if (m.col_idx_[k] >= cols || (k > m.row_ptr_[r] && m.col_idx_[k - 1] >= m.col_idx_[k])) {
                    throw ParseError("corrupt matrix cache column indices");
                }
            }
        }
        return {std::move(m), hash};
    }

private:
    template <typename T>
    static void put(std::ostream& out, T v) {
        out.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
    template <typename T>
    static T get(std::istream& in) {
        T v{};
        in.read(reinterpret_cast<char*>(&v), sizeof v);
        if (!in) throw ParseError("truncated matrix cache");
        return v;
    }

    std::size_t cols_ = 0;
    std::vector<std::size_t> row_ptr_;
    std::vector<ColumnId> col_idx_;
    std::vector<double> values_;
};

} // namespace lmofs
