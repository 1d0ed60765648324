#include <gtest/gtest.h>

#include "metats/errors.hpp"
#include "metats/types.hpp"

using namespace metats;

TEST(GaussianBelief, ValidatesInputs) {
    EXPECT_THROW(GaussianBelief(Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(3, 3), 1.0), InvalidBelief);
    EXPECT_THROW(GaussianBelief(Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2), 0.0), InvalidBelief);
    EXPECT_THROW(GaussianBelief(Eigen::VectorXd::Zero(2), -Eigen::MatrixXd::Identity(2, 2), 1.0), InvalidBelief);
    Eigen::MatrixXd skew(2, 2);
    skew << 1.0, 0.5, 0.0, 1.0;
    EXPECT_THROW(GaussianBelief(Eigen::VectorXd::Zero(2), skew, 1.0), InvalidBelief);
    Eigen::VectorXd bad = Eigen::VectorXd::Zero(2);
    bad[1] = std::numeric_limits<double>::infinity();
    EXPECT_THROW(GaussianBelief(bad, Eigen::MatrixXd::Identity(2, 2), 1.0), InvalidBelief);
}

TEST(SampleGaussian, DegenerateCovarianceReturnsMean) {
    const Eigen::Vector3d mu(1.5, -2.0, 0.25);
    const GaussianBelief g(mu, 1e-30 * Eigen::MatrixXd::Identity(3, 3), 1.0);
    Rng rng = substream(1, 0, 0, 0, Purpose::kVerification);
    for (int i = 0; i < 10; ++i) EXPECT_LT((sample_gaussian(g, rng) - mu).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(SampleGaussian, EmpiricalVarianceScalar) {
    const GaussianBelief g(Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1), 1.0);
    Rng rng = substream(2024, 0, 0, 0, Purpose::kVerification);
    const int n = 100000;
    double s = 0, s2 = 0;
    for (int i = 0; i < n; ++i) {
        const double x = sample_gaussian(g, rng)[0];
        s += x;
        s2 += x * x;
    }
    const double var = s2 / n - (s / n) * (s / n);
    EXPECT_NEAR(var, 1.0, 0.05);
}

TEST(SampleGaussian, CovarianceIncludesNoiseScale) {
    Eigen::Matrix2d core;
    core << 2.0, 0.6, 0.6, 1.0;
    const GaussianBelief g(Eigen::Vector2d(1.0, -1.0), core, 0.5);
    Rng rng = substream(77, 0, 0, 0, Purpose::kVerification);
    const int n = 200000;
    Eigen::Vector2d m = Eigen::Vector2d::Zero();
    Eigen::Matrix2d c = Eigen::Matrix2d::Zero();
    std::vector<Eigen::Vector2d> xs;
    for (int i = 0; i < n; ++i) xs.push_back(sample_gaussian(g, rng));
    for (const auto& x : xs) m += x;
    m /= n;
    for (const auto& x : xs) c += (x - m) * (x - m).transpose();
    c /= n;
    EXPECT_LT((m - g.mean()).cwiseAbs().maxCoeff(), 0.01);
    EXPECT_LT((c - 0.25 * core).cwiseAbs().maxCoeff(), 0.01);
}

TEST(SampleGaussian, SameSeedSameDraw) {
    const GaussianBelief g(Eigen::VectorXd::Zero(4), Eigen::MatrixXd::Identity(4, 4), 1.0);
    Rng a = substream(5, 1, 1, 1, Purpose::kPosteriorSample);
    Rng b = substream(5, 1, 1, 1, Purpose::kPosteriorSample);
    EXPECT_EQ(sample_gaussian(g, a), sample_gaussian(g, b));
}

TEST(InstantRegret, HandComputed) {
    const BanditInstance inst{Eigen::Vector2d(1.0, 0.0)};
    RoundContexts ctx;
    ctx.arms.resize(3, 2);
    ctx.arms << 1.0, 0.0, 0.0, 1.0, 0.5, 0.5;
    EXPECT_DOUBLE_EQ(instant_regret(inst, ctx, 0), 0.0);
    EXPECT_DOUBLE_EQ(instant_regret(inst, ctx, 1), 1.0);
    EXPECT_DOUBLE_EQ(instant_regret(inst, ctx, 2), 0.5);
}

TEST(InstantRegret, SingleArmIsZero) {
    const BanditInstance inst{Eigen::Vector3d(0.3, -2.0, 1.0)};
    RoundContexts ctx;
    ctx.arms = Eigen::RowVector3d(4.0, 1.0, -7.0);
    EXPECT_EQ(instant_regret(inst, ctx, 0), 0.0);
}

TEST(InstantRegret, BadArmIndexThrows) {
    const BanditInstance inst{Eigen::Vector2d(1.0, 0.0)};
    RoundContexts ctx;
    ctx.arms = Eigen::MatrixXd::Identity(2, 2);
    EXPECT_THROW(instant_regret(inst, ctx, 2), ArmIndexError);
    EXPECT_THROW(instant_regret(inst, ctx, -1), ArmIndexError);
}

TEST(ArgmaxLowest, TiesGoToLowestIndex) {
    EXPECT_EQ(argmax_lowest(Eigen::Vector4d(1.0, 3.0, 3.0, 2.0)), 1);
    EXPECT_EQ(argmax_lowest(Eigen::Vector3d::Constant(0.5)), 0);
}

TEST(AgentNames, RoundTrip) {
    for (AgentKind a : all_agents()) EXPECT_EQ(parse_agent(to_string(a)), a);
    EXPECT_FALSE(parse_agent("ucb").has_value());
}

TEST(ContextHash, SensitiveToValues) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Ones(3, 2);
    Eigen::MatrixXd b = a;
    EXPECT_EQ(context_hash(a), context_hash(b));
    b(2, 1) = std::nextafter(1.0, 2.0);
    EXPECT_NE(context_hash(a), context_hash(b));
}
