#include "volnet/error.hpp"
#include "volnet/forecast.hpp"

#include "support/oracles.hpp"
#include "support/synthetic.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace volnet {
namespace {

RollingConfig small_config(NetworkMode mode = NetworkMode::fully_connected) {
    RollingConfig cfg;
    cfg.initial_window = 200;
    cfg.refit_window = 150;
    cfg.block = 22;
    cfg.network_mode = mode;
    return cfg;
}

ModelSpec harx(Variant v) {
    ModelSpec s;
    s.variant = v;
    s.exog = {ExogTerm{"iv", {1}}};
    return s;
}

SimOutput sim(std::size_t n, std::size_t length, std::uint64_t seed, double noise = 0.5) {
    return simulate(testing::global_harx_sim(n, length, seed, noise));
}

TimeSeriesPanel perturb_after(const TimeSeriesPanel& p, std::size_t cut, double delta) {
    Eigen::MatrixXd v = p.values();
    for (Eigen::Index t = static_cast<Eigen::Index>(cut) + 1; t < v.rows(); ++t) v.row(t).array() += delta;
    return TimeSeriesPanel(p.node_ids(), p.dates(), v);
}

TEST(StandardiseTest, Examples) {
    const std::vector<double> x{1.0, 2.0, 3.0};
    const auto s = standardise_window(x);
    EXPECT_DOUBLE_EQ(s.mean, 2.0);
    EXPECT_DOUBLE_EQ(s.std, 1.0);
    EXPECT_DOUBLE_EQ(s.z(0), -1.0);
    EXPECT_DOUBLE_EQ(s.z(1), 0.0);
    EXPECT_DOUBLE_EQ(s.z(2), 1.0);

    const std::vector<double> c{4.0, 4.0, 4.0};
    try {
        standardise_window(c, "log_rv[SPX]");
        FAIL();
    } catch (const EstimationError& e) {
        EXPECT_NE(std::string(e.what()).find("log_rv[SPX]"), std::string::npos);
    }

    const std::vector<double> r{0.3, -1.7, 2.25, 9.0, -4.125};
    const auto z = standardise_window(r);
    for (std::size_t k = 0; k < r.size(); ++k)
        EXPECT_NEAR(z.z(static_cast<Eigen::Index>(k)) * z.std + z.mean, r[k], 1e-12);
}

TEST(JensenTest, Examples) {
    EXPECT_NEAR(jensen_backtransform(0.0, 2.0), std::exp(1.0), 1e-15);
    EXPECT_NEAR(jensen_backtransform(std::log(4.0), 0.0), 4.0, 1e-14);
    EXPECT_NEAR(jensen_backtransform(1.0, 0.5), 3.490342957461841, 1e-12);
    EXPECT_LT(jensen_backtransform(0.1, 0.2), jensen_backtransform(0.1, 0.3));
    EXPECT_LT(jensen_backtransform(0.1, 0.2), jensen_backtransform(0.2, 0.2));
}

TEST(RollingConfigTest, Validation) {
    const auto spec = harx(Variant::global);
    auto cfg = small_config();
    EXPECT_NO_THROW(cfg.validate(spec));
    cfg.refit_window = 250;
    EXPECT_THROW(cfg.validate(spec), InputError);
    cfg = small_config();
    cfg.block = 0;
    EXPECT_THROW(cfg.validate(spec), InputError);
    cfg = small_config();
    cfg.refit_window = 23;
    EXPECT_THROW(cfg.validate(spec), InputError);
    cfg.refit_window = 24;
    EXPECT_NO_THROW(cfg.validate(spec));
}

TEST(BacktestTest, SingleForecastAtBoundary) {
    const auto out = sim(3, 201, 1);
    const auto res = run_backtest(out.log_rv, out.exog, *out.returns, harx(Variant::global), small_config());
    ASSERT_EQ(res.forecasts.n_dates(), 1u);
    EXPECT_EQ(res.forecasts.dates()[0], out.log_rv.dates()[200]);
    EXPECT_EQ(res.refits.size(), 1u);
    EXPECT_EQ(res.refits[0].refit_date, out.log_rv.dates()[199]);
    EXPECT_EQ(res.n_params, 7u);
}

TEST(BacktestTest, TooShortPanel) {
    const auto out = sim(3, 200, 1);
    EXPECT_THROW(run_backtest(out.log_rv, out.exog, *out.returns, harx(Variant::global), small_config()), InputError);
}

TEST(BacktestTest, RefitCountAndCoverage) {
    const auto out = sim(3, 300, 2);
    const auto res = run_backtest(out.log_rv, out.exog, *out.returns, harx(Variant::standard), small_config());
    EXPECT_EQ(res.refits.size(), 5u);  // ceil(100 / 22)
    ASSERT_EQ(res.forecasts.n_dates(), 100u);
    for (std::size_t k = 0; k < 100; ++k) EXPECT_EQ(res.forecasts.dates()[k], out.log_rv.dates()[200 + k]);
    std::size_t total = 0;
    for (std::size_t r = 0; r < res.refits.size(); ++r) {
        EXPECT_EQ(res.refits[r].origin, 200 + 22 * r);
        total += res.refits[r].n_forecasts;
    }
    EXPECT_EQ(total, 100u);
    EXPECT_EQ(res.refits.back().n_forecasts, 12u);
    EXPECT_TRUE(res.actuals.same_shape(res.forecasts));
    for (std::size_t k = 0; k < 100; ++k)
        for (std::size_t i = 0; i < 3; ++i) {
            EXPECT_GT(res.forecasts(k, i), 0.0);
            EXPECT_NEAR(res.actuals(k, i), std::exp(out.log_rv(200 + k, i)), 1e-15 * res.actuals(k, i));
        }
}

TEST(BacktestTest, ZeroNoiseLocalModelForecastsExactly) {
    auto spec = testing::global_harx_sim(3, 300, 3, 0.0);
    spec.model.variant = Variant::local;
    const auto keys = coefficient_keys(spec.model, 3);
    spec.coefficients.resize(static_cast<Eigen::Index>(keys.size()));
    for (std::size_t i = 0; i < 3; ++i) {
        Eigen::VectorXd block(7);
        block << 0.2, 0.3, 0.2, 0.1, -0.05, -0.05, 0.1 + 0.05 * static_cast<double>(i);
        spec.coefficients.segment(static_cast<Eigen::Index>(7 * i), 7) = block;
    }
    const auto out = simulate(spec);
    const auto res = run_backtest(out.log_rv, out.exog, *out.returns, spec.model, small_config());
    for (std::size_t k = 0; k < res.log_forecasts.n_dates(); ++k)
        for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(res.log_forecasts(k, i), out.log_rv(200 + k, i), 1e-8);
}

TEST(BacktestTest, LookAheadFree) {
    const auto out = sim(3, 320, 4);
    for (NetworkMode mode : {NetworkMode::fully_connected, NetworkMode::graphical_lasso}) {
        const auto cfg = small_config(mode);
        const auto spec = harx(Variant::global);
        const auto base = run_backtest(out.log_rv, out.exog, *out.returns, spec, cfg);
        for (std::size_t cut : {200u, 233u, 290u}) {
            NamedPanels ex = out.exog;
            ex["iv"] = perturb_after(ex["iv"], cut, 3.0);
            const auto moved = run_backtest(perturb_after(out.log_rv, cut, 1.5), ex,
                                            perturb_after(*out.returns, cut, -0.2), spec, cfg);
            for (std::size_t k = 0; k + 200 <= cut + 1; ++k)
                for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(moved.forecasts(k, i), base.forecasts(k, i));
            EXPECT_NE(moved.forecasts(cut - 200 + 2, 0), base.forecasts(cut - 200 + 2, 0));
        }
    }
}

TEST(BacktestTest, BlockSizeAgreesAtOrigins) {
    const auto out = sim(4, 300, 5);
    auto one = small_config();
    one.block = 1;
    const auto spec = harx(Variant::standard);
    const auto a = run_backtest(out.log_rv, out.exog, *out.returns, spec, small_config());
    const auto b = run_backtest(out.log_rv, out.exog, *out.returns, spec, one);
    EXPECT_EQ(b.refits.size(), 100u);
    for (std::size_t k = 0; k < 100; k += 22)
        for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(a.forecasts(k, i), b.forecasts(k, i));
}

TEST(BacktestTest, ThreadCountDoesNotChangeResults) {
    const auto out = sim(4, 330, 6);
    const auto spec = harx(Variant::local);
    const auto cfg = small_config(NetworkMode::graphical_lasso);
    const auto a = run_backtest(out.log_rv, out.exog, *out.returns, spec, cfg, 1);
    const auto b = run_backtest(out.log_rv, out.exog, *out.returns, spec, cfg, 3);
    EXPECT_EQ(a.forecasts.values(), b.forecasts.values());
    ASSERT_EQ(a.refits.size(), b.refits.size());
    for (std::size_t r = 0; r < a.refits.size(); ++r) {
        EXPECT_EQ(a.refits[r].coefficients, b.refits[r].coefficients);
        EXPECT_EQ(a.refits[r].network, b.refits[r].network);
    }
    ASSERT_TRUE(a.rho.has_value());
    EXPECT_EQ(*a.rho, *b.rho);
}

TEST(BacktestTest, GraphicalLassoModeRecordsNetworks) {
    const auto out = sim(4, 260, 7);
    auto cfg = small_config(NetworkMode::graphical_lasso);
    cfg.glasso_rho = 10.0;  // beyond every correlation: no edges
    const auto res = run_backtest(out.log_rv, out.exog, *out.returns, harx(Variant::global), cfg);
    EXPECT_EQ(*res.rho, 10.0);
    for (const auto& r : res.refits) EXPECT_TRUE(r.network.edges().empty());

    cfg.glasso_rho = 0.0;
    const auto dense = run_backtest(out.log_rv, out.exog, *out.returns, harx(Variant::global), cfg);
    for (const auto& r : dense.refits) EXPECT_EQ(r.network, fully_connected(4));
}

TEST(BacktestTest, EmptyNetworkLocalEqualsPerNodeRegressions) {
    const auto out = sim(3, 280, 8);
    auto spec = harx(Variant::local);
    const auto cfg = small_config(NetworkMode::empty);
    const auto joint = run_backtest(out.log_rv, out.exog, *out.returns, spec, cfg);
    for (std::size_t i = 0; i < 3; ++i) {
        const std::vector<std::string> id{out.log_rv.node_ids()[i]};
        const auto col = [&](const TimeSeriesPanel& p) {
            return TimeSeriesPanel(id, p.dates(), p.values().col(static_cast<Eigen::Index>(i)));
        };
        const auto solo = run_backtest(col(out.log_rv), {{"iv", col(out.exog.at("iv"))}}, col(*out.returns), spec, cfg);
        for (std::size_t k = 0; k < joint.forecasts.n_dates(); ++k)
            EXPECT_NEAR(joint.forecasts(k, i), solo.forecasts(k, 0), 1e-10 * solo.forecasts(k, 0));
    }
}

TEST(BacktestTest, ErrorsNameTheRefitDate) {
    auto out = sim(3, 260, 9);
    Eigen::MatrixXd v = out.log_rv.values();
    v.block(60, 1, 200, 1).setConstant(-9.0);  // flat from row 60: the second window is degenerate
    const TimeSeriesPanel flat(out.log_rv.node_ids(), out.log_rv.dates(), v);
    try {
        run_backtest(flat, out.exog, *out.returns, harx(Variant::global), small_config());
        FAIL();
    } catch (const EstimationError& e) {
        EXPECT_NE(std::string(e.what()).find("refit " + out.log_rv.dates()[199]), std::string::npos) << e.what();
    }

    NamedPanels short_exog{{"iv", out.exog.at("iv").slice_rows(0, 250)}};
    EXPECT_THROW(run_backtest(out.log_rv, short_exog, *out.returns, harx(Variant::global), small_config()),
                 InputError);
    EXPECT_THROW(run_backtest(out.log_rv, {}, *out.returns, harx(Variant::global), small_config()), InputError);
}

TEST(BacktestTest, CsvOutputsRoundTrip) {
    const auto out = sim(3, 250, 10);
    const auto res = run_backtest(out.log_rv, out.exog, *out.returns, harx(Variant::global), small_config());
    const auto dir = testing::temp_dir("forecast_csv");
    write_forecasts_csv(dir / "forecasts.csv", res);
    write_coefficients_csv(dir / "coefficients.csv", res);
    write_residual_var_csv(dir / "residual_var.csv", res);
    write_network_trajectory(dir / "networks", res);
    const auto [actual, forecast] = read_forecasts_csv(dir / "forecasts.csv");
    EXPECT_EQ(forecast.values(), res.forecasts.values());
    EXPECT_EQ(actual.values(), res.actuals.values());
    const std::string coef = testing::slurp(dir / "coefficients.csv");
    EXPECT_EQ(coef.rfind("refit_date,coefficient_key,value\n", 0), 0u);
    EXPECT_NE(coef.find(res.refits[0].refit_date + ",lambda_iv_1,"), std::string::npos);
    EXPECT_TRUE(std::filesystem::exists(dir / "networks" / (res.refits[1].refit_date + ".json")));
    std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace volnet
