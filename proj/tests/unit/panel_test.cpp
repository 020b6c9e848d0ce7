#include "volnet/csv.hpp"
#include "volnet/error.hpp"
#include "volnet/panel.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

namespace volnet {
namespace {

TimeSeriesPanel make_panel(std::vector<std::string> nodes, std::vector<std::string> dates,
                           std::initializer_list<std::initializer_list<double>> rows) {
    Eigen::MatrixXd v(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(nodes.size()));
    Eigen::Index r = 0;
    for (const auto& row : rows) {
        Eigen::Index c = 0;
        for (double x : row) v(r, c++) = x;
        ++r;
    }
    return TimeSeriesPanel(std::move(nodes), std::move(dates), std::move(v));
}

TEST(PanelTest, RejectsUnorderedDatesAndDuplicateNodes) {
    EXPECT_THROW(make_panel({"A"}, {"2020-01-02", "2020-01-01"}, {{1}, {2}}), InputError);
    EXPECT_THROW(make_panel({"A"}, {"2020-01-01", "2020-01-01"}, {{1}, {2}}), InputError);
    EXPECT_THROW(make_panel({"A", "A"}, {"2020-01-01"}, {{1, 2}}), InputError);
    EXPECT_THROW(make_panel({"A"}, {"2020-01-01"}, {{std::nan("")}}), InputError);
}

TEST(RealisedVarianceTest, SingleGridIsSumOfSquares) {
    IntradayDay day{{0.0, 0.01, -0.01}, 1};  // returns 0.01, -0.02
    EXPECT_NEAR(compute_rv_ss(day), 0.0005, 1e-18);
}

TEST(RealisedVarianceTest, ConstantPricesGiveZero) {
    for (std::size_t spacing : {1u, 2u, 5u}) {
        IntradayDay day{std::vector<double>(20, 4.2), spacing};
        EXPECT_EQ(compute_rv_ss(day), 0.0);
    }
}

TEST(RealisedVarianceTest, TwoStaggeredGridsByHand) {
    // grid 0: prices at 0,2,4 -> returns 0.03, 0.02 -> 0.0013
    // grid 1: prices at 1,3 then the close at 4 -> returns 0.01, 0.03 -> 0.0010
    IntradayDay day{{0.0, 0.01, 0.03, 0.02, 0.05}, 2};
    EXPECT_NEAR(compute_rv_ss(day), 0.00115, 1e-15);
}

TEST(RealisedVarianceTest, InsufficientData) {
    EXPECT_THROW(compute_rv_ss(IntradayDay{{0.0, 0.1}, 2}), InputError);
    EXPECT_THROW(compute_rv_ss(IntradayDay{{0.0, 0.1}, 0}), InputError);
}

TEST(RealisedVarianceTest, ShiftInvariantAndPlainAtUnitSpacing) {
    std::mt19937_64 gen(7);
    std::normal_distribution<double> step(0.0, 0.001);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<double> p{0.0};
        for (int k = 0; k < 78; ++k) p.push_back(p.back() + step(gen));
        for (std::size_t spacing : {1u, 3u, 5u}) {
            IntradayDay day{p, spacing};
            IntradayDay shifted{p, spacing};
            for (auto& x : shifted.log_prices) x += 4.6;
            EXPECT_NEAR(compute_rv_ss(day), compute_rv_ss(shifted), 1e-12);
            EXPECT_GE(compute_rv_ss(day), 0.0);
        }
        double plain = 0.0;
        for (std::size_t k = 1; k < p.size(); ++k) plain += (p[k] - p[k - 1]) * (p[k] - p[k - 1]);
        EXPECT_NEAR(compute_rv_ss(IntradayDay{p, 1}), plain, 1e-18);
    }
}

TEST(LogTransformTest, ValuesAndErrors) {
    const auto p = make_panel({"A", "B"}, {"d1", "d2"}, {{1.0, std::exp(1.0)}, {2.0, 3.0}});
    const auto l = log_transform(p);
    EXPECT_EQ(l(0, 0), 0.0);
    EXPECT_DOUBLE_EQ(l(0, 1), 1.0);
    EXPECT_EQ(l.dates(), p.dates());

    const auto bad = make_panel({"A", "B"}, {"d1", "d2"}, {{1.0, 1.0}, {1.0, 0.0}});
    try {
        log_transform(bad);
        FAIL() << "expected InputError";
    } catch (const InputError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("'B'"), std::string::npos);
        EXPECT_NE(msg.find("d2"), std::string::npos);
    }
}

TEST(SplitReturnsTest, PositiveAndNegativeParts) {
    const auto r = make_panel({"A", "B", "C"}, {"d1"}, {{0.5, -0.3, 0.0}});
    const auto [good, bad] = split_returns(r);
    EXPECT_EQ(good(0, 0), 0.5);
    EXPECT_EQ(bad(0, 0), 0.0);
    EXPECT_EQ(good(0, 1), 0.0);
    EXPECT_EQ(bad(0, 1), -0.3);
    EXPECT_EQ(good(0, 2), 0.0);
    EXPECT_EQ(bad(0, 2), 0.0);
}

TEST(SplitReturnsTest, ComponentsRecombineExactly) {
    std::mt19937_64 gen(3);
    std::normal_distribution<double> d(0.0, 0.02);
    Eigen::MatrixXd v(40, 4);
    for (Eigen::Index t = 0; t < v.rows(); ++t)
        for (Eigen::Index i = 0; i < v.cols(); ++i) v(t, i) = d(gen);
    std::vector<std::string> dates;
    for (int t = 0; t < 40; ++t) dates.push_back("d" + std::to_string(100 + t));
    const TimeSeriesPanel r({"a", "b", "c", "d"}, dates, v);
    const auto [good, bad] = split_returns(r);
    for (Eigen::Index t = 0; t < v.rows(); ++t) {
        for (Eigen::Index i = 0; i < v.cols(); ++i) {
            EXPECT_EQ(good.values()(t, i) + bad.values()(t, i), v(t, i));
            EXPECT_GE(good.values()(t, i), 0.0);
            EXPECT_LE(bad.values()(t, i), 0.0);
            EXPECT_EQ(good.values()(t, i) * bad.values()(t, i), 0.0);
        }
    }
}

TEST(OvernightReturnsTest, DirectFormula) {
    const auto opens = make_panel({"A"}, {"d1", "d2"}, {{0.0}, {101.0}});
    const auto closes = make_panel({"A"}, {"d1", "d2"}, {{100.0}, {0.0}});
    const auto on = overnight_returns(opens, closes);
    ASSERT_EQ(on.n_dates(), 1u);
    EXPECT_EQ(on.dates()[0], "d2");
    EXPECT_NEAR(on(0, 0), 0.01, 1e-15);

    const auto flat = overnight_returns(make_panel({"A"}, {"d1", "d2"}, {{5.0}, {100.0}}),
                                        make_panel({"A"}, {"d1", "d2"}, {{100.0}, {7.0}}));
    EXPECT_EQ(flat(0, 0), 0.0);
}

TEST(OvernightReturnsTest, ThreeDaysTwoNodesByHand) {
    const auto opens = make_panel({"A", "B"}, {"d1", "d2", "d3"}, {{100.0, 200.0}, {101.0, 198.0}, {99.0, 202.0}});
    const auto closes = make_panel({"A", "B"}, {"d1", "d2", "d3"}, {{100.5, 199.0}, {100.0, 200.0}, {98.0, 203.0}});
    const auto on = overnight_returns(opens, closes);
    ASSERT_EQ(on.n_dates(), 2u);
    EXPECT_EQ(on.dates(), (std::vector<std::string>{"d2", "d3"}));
    EXPECT_NEAR(on(0, 0), 0.004975124378109453, 1e-15);   // 101 / 100.5 - 1
    EXPECT_NEAR(on(0, 1), -0.005025125628140725, 1e-15);  // 198 / 199 - 1
    EXPECT_NEAR(on(1, 0), -0.01, 1e-15);                  // 99 / 100 - 1
    EXPECT_NEAR(on(1, 1), 0.01, 1e-15);                   // 202 / 200 - 1
}

TEST(OvernightReturnsTest, ZeroPreviousCloseIsAnError) {
    const auto opens = make_panel({"A"}, {"d1", "d2"}, {{1.0}, {1.0}});
    const auto closes = make_panel({"A"}, {"d1", "d2"}, {{0.0}, {1.0}});
    EXPECT_THROW(overnight_returns(opens, closes), InputError);
}

TEST(AlignTest, IdenticalPanelsUnchanged) {
    const auto p = make_panel({"A", "B"}, {"d1", "d2"}, {{1, 2}, {3, 4}});
    const auto res = align({{"x", p}, {"y", p}});
    EXPECT_EQ(res.dropped_dates, 0u);
    EXPECT_EQ(res.panels.at("x").values(), p.values());
    EXPECT_TRUE(res.panels.at("y").same_shape(p));
}

TEST(AlignTest, MissingDateDroppedEverywhereAndNodesReordered) {
    const auto a = make_panel({"A", "B"}, {"d1", "d2", "d3"}, {{1, 2}, {3, 4}, {5, 6}});
    const auto b = make_panel({"B", "A"}, {"d1", "d3"}, {{20, 10}, {60, 50}});
    const auto res = align({{"a", a}, {"b", b}});
    EXPECT_EQ(res.dropped_dates, 1u);
    const auto& bb = res.panels.at("b");
    EXPECT_EQ(bb.node_ids(), (std::vector<std::string>{"A", "B"}));
    EXPECT_EQ(bb.dates(), (std::vector<std::string>{"d1", "d3"}));
    EXPECT_EQ(bb(1, 0), 50.0);
    EXPECT_EQ(res.panels.at("a")(1, 1), 6.0);
}

TEST(AlignTest, DisjointDatesAndNodeMismatchAreErrors) {
    const auto a = make_panel({"A"}, {"d1"}, {{1}});
    const auto b = make_panel({"A"}, {"d2"}, {{1}});
    EXPECT_THROW(align({{"a", a}, {"b", b}}), InputError);
    const auto c = make_panel({"Z"}, {"d1"}, {{1}});
    EXPECT_THROW(align({{"a", a}, {"c", c}}), InputError);
}

TEST(AlignTest, Idempotent) {
    std::mt19937 gen(11);
    for (int rep = 0; rep < 20; ++rep) {
        NamedPanels in;
        for (const char* name : {"p", "q", "r"}) {
            std::vector<std::string> dates;
            for (int d = 0; d < 30; ++d) {
                if (gen() % 4 != 0) dates.push_back("2021-01-" + std::string(d < 9 ? "0" : "") + std::to_string(d + 1));
            }
            Eigen::MatrixXd v = Eigen::MatrixXd::Random(static_cast<Eigen::Index>(dates.size()), 3);
            std::vector<std::string> nodes{"x", "y", "z"};
            std::shuffle(nodes.begin(), nodes.end(), gen);
            in.emplace(name, TimeSeriesPanel(nodes, dates, v));
        }
        AlignResult once;
        try {
            once = align(in);
        } catch (const InputError&) {
            continue;
        }
        const auto twice = align(once.panels);
        EXPECT_EQ(twice.dropped_dates, 0u);
        for (const auto& [name, p] : once.panels) {
            EXPECT_TRUE(p.same_shape(twice.panels.at(name)));
            EXPECT_EQ(p.values(), twice.panels.at(name).values());
        }
    }
}

TEST(CsvTest, RoundTripAndMissingCells) {
    std::istringstream in("date,A,B\n2020-01-02,1.5,2\n2020-01-01,0.25,-3e-4\n2020-01-03,NA,1\n");
    csv::PanelReadReport report;
    const auto p = csv::read_panel(in, "mem", &report);
    EXPECT_EQ(report.rows_read, 3u);
    EXPECT_EQ(report.incomplete_dates, (std::vector<std::string>{"2020-01-03"}));
    ASSERT_EQ(p.n_dates(), 2u);
    EXPECT_EQ(p.dates()[0], "2020-01-01");
    EXPECT_EQ(p(0, 1), -3e-4);

    std::ostringstream out;
    csv::write_panel(out, p);
    EXPECT_EQ(out.str(), "date,A,B\n2020-01-01,0.25,-3e-04\n2020-01-02,1.5,2\n");
    std::istringstream again(out.str());
    EXPECT_EQ(csv::read_panel(again, "mem").values(), p.values());
}

TEST(CsvTest, MalformedInput) {
    std::istringstream short_row("date,A,B\n2020-01-01,1\n");
    EXPECT_THROW(csv::read_panel(short_row, "mem"), InputError);
    std::istringstream bad_header("day,A\n2020-01-01,1\n");
    EXPECT_THROW(csv::read_panel(bad_header, "mem"), InputError);
    std::istringstream junk("date,A\n2020-01-01,1x\n");
    EXPECT_THROW(csv::read_panel(junk, "mem"), InputError);
    std::istringstream dup("date,A\n2020-01-01,1\n2020-01-01,2\n");
    EXPECT_THROW(csv::read_panel(dup, "mem"), InputError);
}

}  // namespace
}  // namespace volnet
