#include <gtest/gtest.h>

#include <sstream>

#include "lmofs/ridge.hpp"
#include "support.hpp"

using namespace lmofs;
namespace lt = lmofs::testing;

namespace {

double max_abs_diff(const std::vector<double>& a, const Eigen::VectorXd& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b(static_cast<Eigen::Index>(i))));
    return m;
}

} // namespace

TEST(Ridge, SmallProblemMatchesClosedForm) {
    const auto x = SparseMatrix::from_dense({{1.0, 0.0}, {0.0, 1.0}, {1.0, 1.0}}, 2);
    const std::vector<double> y = {1.0, 2.0, 3.0};
    const auto model = fit_ridge(x, y, FeatureMask::all(2), 1.0);
    const auto oracle = lt::closed_form_ridge(lt::to_eigen(x), Eigen::Map<const Eigen::VectorXd>(y.data(), 3), 1.0);
    EXPECT_LT(max_abs_diff(model.weights, oracle.weights), 1e-10);
    EXPECT_NEAR(model.intercept, oracle.intercept, 1e-10);
    EXPECT_TRUE(model.converged);
}

TEST(Ridge, RandomDenseProblemsMatchClosedForm) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const std::size_t p = 5 + seed * 5;
        const auto prob = lt::random_linear_problem(80, p, seed);
        for (double alpha : {0.1, 1.0, 10.0}) {
            const auto model = fit_ridge(prob.x, prob.y, FeatureMask::all(p), alpha);
            const auto oracle = lt::closed_form_ridge(
                lt::to_eigen(prob.x), Eigen::Map<const Eigen::VectorXd>(prob.y.data(), 80), alpha);
            EXPECT_LT(max_abs_diff(model.weights, oracle.weights), 1e-6) << "seed " << seed << " alpha " << alpha;
            EXPECT_NEAR(model.intercept, oracle.intercept, 1e-6);
        }
    }
}

TEST(Ridge, ActiveMaskMatchesFitOnSelectedColumns) {
    const auto prob = lt::random_linear_problem(60, 12, 7);
    const std::vector<std::size_t> cols = {1, 4, 5, 11};
    const auto mask = FeatureMask::from_columns(12, cols);
    const auto model = fit_ridge(prob.x, prob.y, mask, 1.0);
    const auto oracle = lt::closed_form_ridge(lt::take_columns(lt::to_eigen(prob.x), cols),
                                              Eigen::Map<const Eigen::VectorXd>(prob.y.data(), 60), 1.0);
    EXPECT_LT(max_abs_diff(model.weights, oracle.weights), 1e-8);
}

TEST(Ridge, HugePenaltyPredictsTheMean) {
    const auto prob = lt::random_linear_problem(50, 6, 3);
    const auto model = fit_ridge(prob.x, prob.y, FeatureMask::all(6), 1e12);
    double mean = 0.0;
    for (double v : prob.y) mean += v;
    mean /= 50.0;
    for (double p : predict(model, prob.x)) EXPECT_NEAR(p, mean, 1e-6);
}

TEST(Ridge, TrainingResidualGrowsWithPenalty) {
    const auto prob = lt::random_linear_problem(70, 10, 4);
    double previous = -1.0;
    for (double alpha : {0.01, 0.1, 1.0, 10.0, 100.0}) {
        const auto model = fit_ridge(prob.x, prob.y, FeatureMask::all(10), alpha);
        const double train_mse = mse(predict(model, prob.x), prob.y).mse;
        EXPECT_GE(train_mse, previous - 1e-12) << alpha;
        previous = train_mse;
    }
}

TEST(Ridge, ZeroColumnGetsZeroWeightAndChangesNothing) {
    auto dense = lt::random_linear_problem(40, 5, 5).x.to_dense();
    const auto y = lt::random_linear_problem(40, 5, 5).y;
    for (auto& row : dense) row.push_back(0.0);
    const auto x = SparseMatrix::from_dense(dense, 6);
    const auto with = fit_ridge(x, y, FeatureMask::all(6), 1.0);
    auto without_mask = FeatureMask::all(6);
    without_mask.reset(5);
    const auto without = fit_ridge(x, y, without_mask, 1.0);
    EXPECT_NEAR(with.weights[5], 0.0, 1e-14);
    for (std::size_t j = 0; j < 5; ++j) EXPECT_NEAR(with.weights[j], without.weights[j], 1e-12);
}

TEST(Ridge, ConstantTargetGivesZeroWeights) {
    const auto prob = lt::random_linear_problem(30, 4, 6);
    const std::vector<double> y(30, 0.42);
    const auto model = fit_ridge(prob.x, y, FeatureMask::all(4), 1.0);
    for (double w : model.weights) EXPECT_EQ(w, 0.0);
    EXPECT_DOUBLE_EQ(model.intercept, 0.42);
}

TEST(Ridge, Deterministic) {
    const auto prob = lt::random_linear_problem(100, 20, 8);
    const auto a = fit_ridge(prob.x, prob.y, FeatureMask::all(20), 1.0);
    const auto b = fit_ridge(prob.x, prob.y, FeatureMask::all(20), 1.0);
    EXPECT_EQ(a.weights, b.weights);
    EXPECT_EQ(a.intercept, b.intercept);
}

TEST(Ridge, ErrorPaths) {
    const auto prob = lt::random_linear_problem(10, 3, 9);
    EXPECT_THROW(fit_ridge(prob.x, prob.y, FeatureMask(3), 1.0), Error);
    EXPECT_THROW(fit_ridge(prob.x, std::vector<double>(9, 0.0), FeatureMask::all(3), 1.0), DimensionError);
    EXPECT_THROW(fit_ridge(prob.x, prob.y, FeatureMask::all(4), 1.0), DimensionError);
    EXPECT_THROW(fit_ridge(prob.x, prob.y, FeatureMask::all(3), 0.0), Error);
    auto bad = prob.y;
    bad[2] = std::nan("");
    EXPECT_THROW(fit_ridge(prob.x, bad, FeatureMask::all(3), 1.0), Error);
    const auto model = fit_ridge(prob.x, prob.y, FeatureMask::all(3), 1.0);
    EXPECT_THROW(predict(model, SparseMatrix(2, 4)), DimensionError);
}

TEST(Metrics, MseExamples) {
    EXPECT_DOUBLE_EQ(mse(std::vector<double>{0.5, 0.5}, std::vector<double>{0.0, 1.0}).mse, 0.25);
    EXPECT_DOUBLE_EQ(mse(std::vector<double>{0.2}, std::vector<double>{0.2}).mse, 0.0);
    EXPECT_THROW(mse(std::vector<double>{}, std::vector<double>{}), Error);
    EXPECT_THROW(mse(std::vector<double>{1.0}, std::vector<double>{1.0, 2.0}), DimensionError);
}

TEST(Metrics, MseMatchesNaiveLoop) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> a(257), b(257);
    for (auto& v : a) v = u(rng);
    for (auto& v : b) v = u(rng);
    EXPECT_NEAR(mse(a, b).mse, lt::naive_mse(a, b), 1e-15);
}

TEST(Predict, HandComputedAndClamped) {
    RidgeModel m;
    m.active = FeatureMask::from_columns(3, std::vector<int>{0, 2});
    m.weights = {2.0, -1.0};
    m.intercept = 0.1;
    const auto x = SparseMatrix::from_dense({{0.5, 9.0, 0.2}, {0.0, 0.0, 0.0}, {1.0, 0.0, 0.0}}, 3);
    const auto p = predict(m, x);
    EXPECT_NEAR(p[0], 0.1 + 1.0 - 0.2, 1e-15);
    EXPECT_DOUBLE_EQ(p[1], 0.1);
    EXPECT_DOUBLE_EQ(p[2], 2.1);
    EXPECT_EQ(clamp_score(p[2]), 1.0);
    EXPECT_EQ(clamp_score(-0.3), 0.0);
    EXPECT_EQ(clamp_score(0.3), 0.3);
}

TEST(ModelFile, RoundTrip) {
    const auto prob = lt::random_linear_problem(30, 7, 12);
    const auto model = fit_ridge(prob.x, prob.y, FeatureMask::from_columns(7, std::vector<int>{0, 3, 6}), 2.5);
    std::stringstream s;
    write_model(model, 0xabcdef0123456789ULL, s);
    const auto [back, hash] = read_model(s);
    EXPECT_EQ(hash, 0xabcdef0123456789ULL);
    EXPECT_EQ(back.active, model.active);
    EXPECT_EQ(back.weights, model.weights);
    EXPECT_EQ(back.intercept, model.intercept);
    EXPECT_EQ(back.alpha, 2.5);
    EXPECT_EQ(predict(back, prob.x), predict(model, prob.x));

    std::istringstream junk("{\"format\":\"other\"}");
    EXPECT_THROW(read_model(junk), ParseError);
}

TEST(Predict, ZeroWeightsAndEmptyRowsGiveIntercept) {
    RidgeModel m;
    m.active = FeatureMask::all(2);
    m.weights = {0.0, 0.0};
    m.intercept = 0.5;
    for (double p : predict(m, SparseMatrix::from_dense({{1.0, 2.0}, {3.0, -4.0}}, 2))) EXPECT_EQ(p, 0.5);
    m.weights = {1.0, 2.0};
    SparseMatrix empty_row(0, 2);
    empty_row.push_row({});
    EXPECT_EQ(predict(m, empty_row)[0], 0.5);
}

TEST(Predict, TrainingResidualsMatchDenseAlgebra) {
    const auto prob = lt::random_linear_problem(40, 8, 13);
    const auto model = fit_ridge(prob.x, prob.y, FeatureMask::all(8), 1.0);
    const auto oracle = lt::closed_form_ridge(lt::to_eigen(prob.x), Eigen::Map<const Eigen::VectorXd>(prob.y.data(), 40), 1.0);
    const Eigen::VectorXd expected = (lt::to_eigen(prob.x) * oracle.weights).array() + oracle.intercept;
    const auto got = predict(model, prob.x);
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], expected(static_cast<Eigen::Index>(i)), 1e-9);
}

TEST(Metrics, TrivialCases) {
    EXPECT_EQ(mse(std::vector<double>{0.3, 0.7}, std::vector<double>{0.3, 0.7}).mse, 0.0);
    EXPECT_EQ(mse(std::vector<double>{0.0, 1.0}, std::vector<double>{1.0, 0.0}).mse, 1.0);
}
