#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>

#include "oracles.hpp"
#include "prism/data.hpp"

using namespace prism;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
    std::string path = std::string(::testing::TempDir()) + name;
    std::ofstream f(path);
    f << content;
    return path;
}

}  // namespace

TEST(LoadCsv, ParsesPlainMatrix) {
    auto path = write_temp("plain.csv", "1,2\n3,4\n5,6\n");
    Dataset ds = load_csv(path, false);
    EXPECT_EQ(ds.T(), 3);
    EXPECT_EQ(ds.D(), 2);
    EXPECT_EQ(ds.values.data, (std::vector<double>{1, 2, 3, 4, 5, 6}));
}

TEST(LoadCsv, HeaderGivesChannelNames) {
    auto path = write_temp("hdr.csv", "a,b\n1,2\n3,4\n5,6\n");
    Dataset ds = load_csv(path, true);
    EXPECT_EQ(ds.channel_names, (std::vector<std::string>{"a", "b"}));
    EXPECT_EQ(ds.values.data, (std::vector<double>{1, 2, 3, 4, 5, 6}));
}

TEST(LoadCsv, NonNumericCellReportsRowAndColumn) {
    auto path = write_temp("bad.csv", "1,x\n");
    try {
        load_csv(path, false);
        FAIL() << "expected parse error";
    } catch (const std::runtime_error& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("row 0"), std::string::npos);
        EXPECT_NE(msg.find("column 1"), std::string::npos);
    }
}

TEST(LoadCsv, EmptyAndRaggedRejected) {
    EXPECT_THROW(load_csv(write_temp("empty.csv", ""), false), std::runtime_error);
    EXPECT_THROW(load_csv(write_temp("ragged.csv", "1,2\n3\n"), false), std::runtime_error);
}

TEST(SplitTrainTest, BoundaryArithmetic) {
    Dataset ds;
    ds.values = Matrix(10, 1);
    for (int i = 0; i < 10; ++i) ds.values.at(i, 0) = i;
    auto [prefix, suffix] = split_train_test(ds, 3);
    EXPECT_EQ(prefix.rows, 7);
    EXPECT_EQ(suffix.rows, 3);
    EXPECT_DOUBLE_EQ(prefix.at(6, 0), 6);
    EXPECT_DOUBLE_EQ(suffix.at(0, 0), 7);
    EXPECT_THROW(split_train_test(ds, 10), std::invalid_argument);
    EXPECT_THROW(split_train_test(ds, 0), std::invalid_argument);
}

TEST(MakeWindows, CountAndIndices) {
    Matrix prefix(10, 1);
    for (int i = 0; i < 10; ++i) prefix.at(i, 0) = i;
    auto windows = make_windows(prefix, 4, 2);
    ASSERT_EQ(windows.size(), 5u);
    EXPECT_EQ(windows.front().end_index, 3);
    EXPECT_EQ(windows.back().end_index, 7);
    // Last history ends at row 7; its future covers rows 8..9.
    EXPECT_DOUBLE_EQ(windows.back().history.at(3, 0), 7);
    EXPECT_DOUBLE_EQ(windows.back().future.at(1, 0), 9);
    // History rows are X[e-L+1 .. e].
    for (const auto& w : windows) {
        for (int r = 0; r < 4; ++r)
            EXPECT_DOUBLE_EQ(w.history.at(r, 0), w.end_index - 3 + r);
        for (int r = 0; r < 2; ++r)
            EXPECT_DOUBLE_EQ(w.future.at(r, 0), w.end_index + 1 + r);
    }
}

TEST(MakeWindows, ExactFitAndTooShort) {
    Matrix exact(6, 2);
    EXPECT_EQ(make_windows(exact, 4, 2).size(), 1u);
    Matrix shorter(5, 2);
    EXPECT_THROW(make_windows(shorter, 4, 2), std::invalid_argument);
}

TEST(MakeWindows, NeverCrossesHoldoutBoundary) {
    Dataset ds;
    ds.values = Matrix(100, 2);
    ds.train_len = 88;
    auto [prefix, suffix] = split_train_test(ds, 12);
    auto windows = make_windows(prefix, 8, 4);
    for (const auto& w : windows) EXPECT_LT(w.end_index + 4, 88);
}

TEST(EmpiricalBounds, MinMaxPerColumn) {
    Matrix m(3, 2);
    m.data = {1, 0, 3, -1, 2, 4};
    auto [lo, hi] = empirical_bounds(m);
    EXPECT_EQ(lo, (std::vector<double>{1, -1}));
    EXPECT_EQ(hi, (std::vector<double>{3, 4}));
    Matrix constant(3, 1, 5.0);
    auto [clo, chi] = empirical_bounds(constant);
    EXPECT_EQ(clo[0], 5.0);
    EXPECT_EQ(chi[0], 5.0);
    EXPECT_THROW(empirical_bounds(Matrix(0, 2)), std::invalid_argument);
}

TEST(RobustKinematics, RampConstantAlternating) {
    Matrix ramp(10, 1);
    for (int i = 0; i < 10; ++i) ramp.at(i, 0) = i;
    auto [v1, a1] = robust_kinematics(ramp);
    EXPECT_DOUBLE_EQ(v1[0], 1.0);
    EXPECT_DOUBLE_EQ(a1[0], 0.0);

    Matrix constant(10, 1, 2.5);
    auto [v2, a2] = robust_kinematics(constant);
    EXPECT_DOUBLE_EQ(v2[0], 0.0);
    EXPECT_DOUBLE_EQ(a2[0], 0.0);

    Matrix alt(10, 1);
    for (int i = 0; i < 10; ++i) alt.at(i, 0) = i % 2;
    auto [v3, a3] = robust_kinematics(alt);
    EXPECT_DOUBLE_EQ(v3[0], 1.0);
    EXPECT_DOUBLE_EQ(a3[0], 2.0);

    EXPECT_THROW(robust_kinematics(Matrix(2, 1)), std::invalid_argument);
}

TEST(RobustKinematics, NearestRankMatchesBruteForce) {
    Rng rng(31);
    Matrix m(50, 1);
    for (double& v : m.data) v = rng.normal();
    auto [v, a] = robust_kinematics(m, 0.9);
    std::vector<double> d1;
    for (int r = 1; r < 50; ++r) d1.push_back(std::abs(m.at(r, 0) - m.at(r - 1, 0)));
    std::sort(d1.begin(), d1.end());
    // Nearest rank: ceil(0.9 * 49) = 45, 1-based.
    EXPECT_DOUBLE_EQ(v[0], d1[44]);
    (void)a;
}

TEST(IntegerLags, RecoversKnownShift) {
    const int T = 200, lag = 3;
    Matrix m(T, 2);
    for (int t = 0; t < T; ++t) {
        m.at(t, 0) = std::sin(2.0 * M_PI * t / 23.0);
        m.at(t, 1) = std::sin(2.0 * M_PI * (t - lag) / 23.0);
    }
    auto lags = estimate_integer_lags(m, 5);
    EXPECT_EQ(lags[0][1], 3);
    EXPECT_EQ(lags[1][0], -3);
    EXPECT_EQ(lags[0][0], 0);
}

TEST(IntegerLags, IdenticalChannelsGiveZero) {
    Matrix m(100, 2);
    Rng rng(5);
    for (int t = 0; t < 100; ++t) {
        const double v = rng.normal();
        m.at(t, 0) = v;
        m.at(t, 1) = v;
    }
    auto lags = estimate_integer_lags(m, 4);
    EXPECT_EQ(lags[0][1], 0);
    EXPECT_EQ(lags[1][0], 0);
}

TEST(IntegerLags, ClippedShiftMatchesRestrictedBruteForce) {
    const int T = 300, true_lag = 7, tau_max = 5;
    Matrix m(T, 2);
    Rng rng(17);
    std::vector<double> base(T + 20);
    for (double& v : base) v = rng.normal();
    // Smooth the base so correlations vary gently with tau.
    for (int pass = 0; pass < 3; ++pass)
        for (std::size_t i = 1; i < base.size(); ++i) base[i] = 0.7 * base[i - 1] + 0.3 * base[i];
    for (int t = 0; t < T; ++t) {
        m.at(t, 0) = base[t + 10];
        m.at(t, 1) = base[t + 10 - true_lag];
    }
    auto lags = estimate_integer_lags(m, tau_max);
    const int expect = oracle::lag_argmax_reference(col_of(m, 0), col_of(m, 1), tau_max);
    EXPECT_EQ(lags[0][1], expect);
    EXPECT_LE(std::abs(lags[0][1]), tau_max);
}

TEST(IntegerLags, AntisymmetricOnStrictMaxima) {
    Rng rng(23);
    const int T = 240;
    for (int trial = 0; trial < 5; ++trial) {
        Matrix m(T, 3);
        std::vector<double> base(T + 12);
        for (double& v : base) v = rng.normal();
        for (std::size_t i = 1; i < base.size(); ++i) base[i] = 0.8 * base[i - 1] + 0.2 * base[i];
        for (int t = 0; t < T; ++t) {
            m.at(t, 0) = base[t + 6];
            m.at(t, 1) = base[t + 4];
            m.at(t, 2) = base[t + 9] + 0.01 * rng.normal();
        }
        auto lags = estimate_integer_lags(m, 5);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) EXPECT_EQ(lags[i][j], -lags[j][i]);
    }
}

TEST(IntegerLags, MatchesBruteForceOnRandomData) {
    Rng rng(41);
    for (int trial = 0; trial < 10; ++trial) {
        const int T = 60;
        Matrix m(T, 3);
        for (double& v : m.data) v = rng.normal();
        auto lags = estimate_integer_lags(m, 4);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                if (i == j) continue;
                EXPECT_EQ(lags[i][j], oracle::lag_argmax_reference(col_of(m, i), col_of(m, j), 4))
                    << "trial " << trial << " pair " << i << "," << j;
            }
    }
}

TEST(Zscore, ColumnsStandardizedAndInvertible) {
    Matrix m(2, 1);
    m.data = {0, 2};
    auto [z, nz] = zscore(m);
    EXPECT_DOUBLE_EQ(nz.mean[0], 1.0);
    EXPECT_DOUBLE_EQ(nz.std[0], 1.0);
    EXPECT_DOUBLE_EQ(z.at(0, 0), -1.0);
    EXPECT_DOUBLE_EQ(z.at(1, 0), 1.0);

    Matrix constant(4, 1, 3.0);
    auto [zc, nzc] = zscore(constant);
    for (double v : zc.data) EXPECT_DOUBLE_EQ(v, 0.0);

    Rng rng(12);
    Matrix r = rng.normal_matrix(30, 4, 2.0);
    auto [zr, nzr] = zscore(r);
    EXPECT_LT(max_abs_diff(zscore_invert(zr, nzr), r), 1e-10);
}

TEST(Budgets, JsonRoundTrip) {
    Rng rng(3);
    Matrix prefix = rng.normal_matrix(40, 3);
    PhysicsBudgets b = compute_budgets(prefix, 4);
    PhysicsBudgets b2 = budgets_from_json(budgets_to_json(b));
    EXPECT_EQ(b.m, b2.m);
    EXPECT_EQ(b.M, b2.M);
    EXPECT_EQ(b.v_max, b2.v_max);
    EXPECT_EQ(b.a_max, b2.a_max);
    EXPECT_EQ(b.lags, b2.lags);
    EXPECT_EQ(b.tau_max, b2.tau_max);
}

TEST(RowAuditTest, TracksMaxRow) {
    Dataset ds;
    ds.values = Matrix(20, 2);
    ds.train_len = 15;
    RowAudit audit;
    ds.rows(0, 15, &audit);
    ds.rows(3, 10, &audit);
    EXPECT_EQ(audit.max_row, 14);
    EXPECT_EQ(audit.reads, 2);
}
