#pragma once

// Ridge regression on sparse features, solved by conjugate gradient on the
// centered normal equations. This is the fitness function of the selection
// search, so it has to be deterministic: single-threaded, fixed iteration
// schedule, zero initial guess.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "sparse_matrix.hpp"

namespace lmofs {

struct SolverOptions {
    std::size_t max_iterations = 1000;
    double tolerance = 1e-8; ///< on the residual norm ||r||, absolute
};

struct RidgeModel {
    std::vector<double> weights; ///< one per active column, ascending column order
    double intercept = 0.0;
    double alpha = 1.0;
    FeatureMask active;
    std::size_t iterations = 0;
    bool converged = true;
};

struct Metrics {
    double mse = 0.0;
};

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

/// Operator for (X_c^T X_c + alpha I) where X_c = X - 1 mu^T, applied without
/// forming the dense centered matrix.
class CenteredNormalOperator {
public:
    CenteredNormalOperator(const SparseMatrix& x, std::span<const double> mu, double alpha)
        : x_(x), mu_(mu), alpha_(alpha), tmp_(x.rows()) {}

    /// out = X_c v
    void apply_x(std::span<const double> v, std::span<double> out) const {
        const double shift = dot(mu_, v);
        for (std::size_t r = 0; r < x_.rows(); ++r) {
            const auto c = x_.row_columns(r);
            const auto val = x_.row_values(r);
            double s = 0.0;
            for (std::size_t k = 0; k < c.size(); ++k) s += val[k] * v[c[k]];
            out[r] = s - shift;
        }
    }

    /// out = X_c^T u
    void apply_xt(std::span<const double> u, std::span<double> out) const {
        std::fill(out.begin(), out.end(), 0.0);
        double total = 0.0;
        for (std::size_t r = 0; r < x_.rows(); ++r) {
            const auto c = x_.row_columns(r);
            const auto val = x_.row_values(r);
            for (std::size_t k = 0; k < c.size(); ++k) out[c[k]] += val[k] * u[r];
            total += u[r];
        }
        for (std::size_t j = 0; j < out.size(); ++j) out[j] -= mu_[j] * total;
    }

    void apply(std::span<const double> v, std::span<double> out) {
        apply_x(v, tmp_);
        apply_xt(tmp_, out);
        for (std::size_t j = 0; j < out.size(); ++j) out[j] += alpha_ * v[j];
    }

private:
    const SparseMatrix& x_;
    std::span<const double> mu_;
    double alpha_;
    std::vector<double> tmp_;
};

} // namespace detail

/// Minimizes ||X_a w + b 1 - y||^2 + alpha ||w||^2 over the active columns,
/// intercept unpenalized.
inline RidgeModel fit_ridge(const SparseMatrix& x, std::span<const double> y, const FeatureMask& active,
                            double alpha = 1.0, const SolverOptions& opts = {}) {
    if (x.rows() != y.size()) {
        throw DimensionError("matrix has " + std::to_string(x.rows()) + " rows but " + std::to_string(y.size()) +
                             " labels were given");
    }
    if (active.size() != x.cols()) throw DimensionError("active mask size does not match column count");
    if (active.count() == 0) throw Error("ridge fit needs at least one active column");
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw Error("ridge penalty must be positive and finite");
    if (y.empty()) throw Error("ridge fit needs at least one row");
    for (double v : y) {
        if (!std::isfinite(v)) throw Error("labels must be finite");
    }

    const SparseMatrix xa = x.select_columns(active);
    const std::size_t n = xa.rows();
    const std::size_t p = xa.cols();

    double y_mean = 0.0;
    for (double v : y) y_mean += v;
    y_mean /= static_cast<double>(n);

    std::vector<double> mu(p, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
        const auto c = xa.row_columns(r);
        const auto v = xa.row_values(r);
        for (std::size_t k = 0; k < c.size(); ++k) mu[c[k]] += v[k];
    }
    for (auto& m : mu) m /= static_cast<double>(n);

    detail::CenteredNormalOperator op(xa, mu, alpha);
    std::vector<double> yc(n);
    for (std::size_t r = 0; r < n; ++r) yc[r] = y[r] - y_mean;
    std::vector<double> rhs(p);
    op.apply_xt(yc, rhs);

    RidgeModel model;
    model.alpha = alpha;
    model.active = active;
    model.weights.assign(p, 0.0);

    const double rhs_norm = std::sqrt(detail::dot(rhs, rhs));
    if (rhs_norm > 0.0) {
        std::vector<double>& w = model.weights;
        std::vector<double> r = rhs;
        std::vector<double> d = r;
        std::vector<double> ad(p);
        double rr = detail::dot(r, r);
        const double stop = opts.tolerance;
        model.converged = false;
        for (std::size_t it = 0; it < opts.max_iterations; ++it) {
            op.apply(d, ad);
            const double step = rr / detail::dot(d, ad);
            for (std::size_t j = 0; j < p; ++j) {
                w[j] += step * d[j];
                r[j] -= step * ad[j];
            }
            const double rr_next = detail::dot(r, r);
            model.iterations = it + 1;
            if (!std::isfinite(rr_next)) throw Error("conjugate gradient diverged");
            if (std::sqrt(rr_next) <= stop) {
                model.converged = true;
                break;
            }
            const double beta = rr_next / rr;
            rr = rr_next;
            for (std::size_t j = 0; j < p; ++j) d[j] = r[j] + beta * d[j];
        }
    }
    model.intercept = y_mean - detail::dot(mu, model.weights);
    if (!std::isfinite(model.intercept)) throw Error("ridge fit produced a non-finite intercept");
    return model;
}

/// Unclamped predictions X_a w + b.
inline std::vector<double> predict(const RidgeModel& model, const SparseMatrix& x) {
    if (x.cols() != model.active.size()) {
        throw DimensionError("matrix has " + std::to_string(x.cols()) + " columns but the model expects " +
                             std::to_string(model.active.size()));
    }
    constexpr auto kInactive = static_cast<std::uint32_t>(-1);
    std::vector<std::uint32_t> local(x.cols(), kInactive);
    std::uint32_t next = 0;
    for (std::size_t j = 0; j < x.cols(); ++j) {
        if (model.active.test(j)) local[j] = next++;
    }
    if (next != model.weights.size()) throw DimensionError("model weights do not match its active set");

    std::vector<double> out(x.rows());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        const auto c = x.row_columns(r);
        const auto v = x.row_values(r);
        double s = 0.0;
        for (std::size_t k = 0; k < c.size(); ++k) {
            if (local[c[k]] != kInactive) s += v[k] * model.weights[local[c[k]]];
        }
        out[r] = s + model.intercept;
    }
    return out;
}

inline Metrics mse(std::span<const double> predicted, std::span<const double> truth) {
    if (predicted.size() != truth.size()) throw DimensionError("mse: length mismatch");
    if (predicted.empty()) throw Error("mse: empty input");
    double s = 0.0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        const double d = predicted[i] - truth[i];
        s += d * d;
    }
    return {s / static_cast<double>(predicted.size())};
}

inline double clamp_score(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

// model.json: {"format":"lmofs-ridge-model","version":1,"alpha":..,"intercept":..,
//              "vocabulary_hash":"<hex>","columns":n,"active":[ids],"weights":[..]}
inline void write_model(const RidgeModel& m, std::uint64_t vocabulary_hash, std::ostream& out) {
    nlohmann::ordered_json j;
    j["format"] = "lmofs-ridge-model";
    j["version"] = 1;
    j["alpha"] = m.alpha;
    j["intercept"] = m.intercept;
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(vocabulary_hash));
    j["vocabulary_hash"] = buf;
    j["columns"] = m.active.size();
    j["active"] = m.active.columns();
    j["weights"] = m.weights;
    out << j.dump(1) << '\n';
}

/// Returns the model and the vocabulary hash it was trained against.
inline std::pair<RidgeModel, std::uint64_t> read_model(std::istream& in) {
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("model file: ") + e.what());
    }
    if (j.value("format", std::string{}) != "lmofs-ridge-model" || j.value("version", 0) != 1) {
        throw ParseError("not a version-1 ridge model file");
    }
    RidgeModel m;
    m.alpha = j.at("alpha").get<double>();
    m.intercept = j.at("intercept").get<double>();
    m.active = FeatureMask::from_columns(j.at("columns").get<std::size_t>(), j.at("active").get<std::vector<ColumnId>>());
    m.weights = j.at("weights").get<std::vector<double>>();
    if (m.weights.size() != m.active.count()) throw ParseError("model weights do not match its active set");
    const auto hash = std::stoull(j.at("vocabulary_hash").get<std::string>(), nullptr, 16);
    return {std::move(m), hash};
}

} // namespace lmofs
