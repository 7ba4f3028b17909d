#pragma once

// Test-only oracles and fixtures. Nothing here calls into the solver or the
// extraction code paths it is used to check.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lmofs/sparse_matrix.hpp"

namespace lmofs::testing {

/// Closed-form ridge on a dense problem: center X and y, solve
/// (Xc^T Xc + alpha I) w = Xc^T yc by Cholesky, b = mean(y) - mean(X) w.
struct DenseRidge {
    Eigen::VectorXd weights;
    double intercept = 0.0;
};

inline DenseRidge closed_form_ridge(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double alpha) {
    const Eigen::RowVectorXd mu = x.colwise().mean();
    const double y_mean = y.mean();
    const Eigen::MatrixXd xc = x.rowwise() - mu;
    const Eigen::VectorXd yc = y.array() - y_mean;
    Eigen::MatrixXd a = xc.transpose() * xc;
    a.diagonal().array() += alpha;
    DenseRidge out;
    out.weights = a.ldlt().solve(xc.transpose() * yc);
    out.intercept = y_mean - mu.dot(out.weights);
    return out;
}

inline Eigen::MatrixXd to_eigen(const SparseMatrix& m) {
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols()));
    for (std::size_t r = 0; r < m.rows(); ++r) {
        const auto c = m.row_columns(r);
        const auto v = m.row_values(r);
        for (std::size_t k = 0; k < c.size(); ++k) d(static_cast<Eigen::Index>(r), c[k]) = v[k];
    }
    return d;
}

/// Keeps the listed columns of a dense matrix, in the given order.
inline Eigen::MatrixXd take_columns(const Eigen::MatrixXd& x, const std::vector<std::size_t>& cols) {
    Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = x.col(static_cast<Eigen::Index>(cols[k]));
    return out;
}

inline Eigen::MatrixXd take_rows(const Eigen::MatrixXd& x, const std::vector<std::size_t>& rows) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), x.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = x.row(static_cast<Eigen::Index>(rows[k]));
    return out;
}

/// Validation MSE of a closed-form ridge fit on the given columns.
inline double oracle_subset_mse(const Eigen::MatrixXd& x_train, const Eigen::VectorXd& y_train,
                                const Eigen::MatrixXd& x_valid, const Eigen::VectorXd& y_valid,
                                const std::vector<std::size_t>& cols, double alpha) {
    const auto fit = closed_form_ridge(take_columns(x_train, cols), y_train, alpha);
    const Eigen::VectorXd pred = (take_columns(x_valid, cols) * fit.weights).array() + fit.intercept;
    return (pred - y_valid).squaredNorm() / static_cast<double>(y_valid.size());
}

inline double naive_mse(const std::vector<double>& a, const std::vector<double>& b) {
    double total = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) total += (a[i] - b[i]) * (a[i] - b[i]);
    return total / static_cast<double>(a.size());
}

struct Problem {
    SparseMatrix x;
    std::vector<double> y;
};

/// Dense Gaussian design with y = X beta + 0.5 + N(0, noise).
inline Problem random_linear_problem(std::size_t rows, std::size_t cols, std::uint64_t seed, double noise = 0.1) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> beta(cols);
    for (auto& b : beta) b = gauss(rng) * 0.3;
    std::vector<std::vector<double>> dense(rows, std::vector<double>(cols));
    Problem p;
    for (std::size_t r = 0; r < rows; ++r) {
        double t = 0.5;
        for (std::size_t c = 0; c < cols; ++c) {
            dense[r][c] = gauss(rng);
            t += dense[r][c] * beta[c];
        }
        p.y.push_back(t + noise * gauss(rng));
    }
    p.x = SparseMatrix::from_dense(dense, cols);
    return p;
}

/// Planted-signal regression: columns [0, 6) carry signal with known
/// coefficients, [6, 30) are perturbed copies of the signal columns (4 each),
/// [30, 60) are pure noise. y = sum beta_k x_k + N(0, 0.05).
struct PlantedProblem {
    Problem data;
    std::vector<std::size_t> signal_columns;
};

inline PlantedProblem planted_problem(std::uint64_t seed, std::size_t rows = 400) {
    constexpr std::size_t kSignal = 6, kCopies = 4, kNoise = 30;
    constexpr std::size_t kCols = kSignal + kSignal * kCopies + kNoise;
    const double beta[kSignal] = {0.9, -0.8, 0.7, -0.6, 0.5, 0.4};
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<std::vector<double>> dense(rows, std::vector<double>(kCols));
    PlantedProblem p;
    for (std::size_t r = 0; r < rows; ++r) {
        double t = 0.0;
        for (std::size_t k = 0; k < kSignal; ++k) {
            dense[r][k] = gauss(rng);
            t += beta[k] * dense[r][k];
        }
        for (std::size_t k = 0; k < kSignal; ++k) {
            for (std::size_t c = 0; c < kCopies; ++c) {
                dense[r][kSignal + k * kCopies + c] = dense[r][k] + gauss(rng);
            }
        }
        for (std::size_t c = kSignal + kSignal * kCopies; c < kCols; ++c) dense[r][c] = gauss(rng);
        p.data.y.push_back(t + 0.05 * gauss(rng));
    }
    p.data.x = SparseMatrix::from_dense(dense, kCols);
    for (std::size_t k = 0; k < kSignal; ++k) p.signal_columns.push_back(k);
    return p;
}

/// Scratch directory removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        path_ = std::filesystem::temp_directory_path() /
                ("lmofs_" + tag + "_" + std::to_string(std::random_device{}()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& p, const std::string& content) {
    std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    out << content;
}

inline std::string read_text(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace lmofs::testing
