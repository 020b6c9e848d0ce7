#include "volnet_cli/cli.hpp"

#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <sstream>

namespace volnet {
namespace {

namespace fs = std::filesystem;


struct Result {
    int code;
    std::string out;
    std::string err;
};

Result volnet(std::vector<std::string> args) {
    args.insert(args.begin(), "volnet");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override { dir_ = testing::temp_dir("cli"); }
    void TearDown() override { fs::remove_all(dir_); }

    fs::path write(const std::string& name, const std::string& text) {
        testing::spit(dir_ / name, text);
        return dir_ / name;
    }

    // small deterministic panels for the ingest command
    void write_raw_inputs() {
        std::ostringstream rv, ret, opens, closes, iv;
        rv << "date,A,B\n";
        ret << "date,B,A\n";
        opens << "date,A,B\n";
        closes << "date,A,B\n";
        iv << "date,A,B\n";
        for (int d = 1; d <= 9; ++d) {
            const std::string date = "2021-03-0" + std::to_string(d);
            rv << date << ',' << 1e-4 * d << ',' << 2e-4 * d << '\n';
            ret << date << ',' << (d % 2 ? -0.01 : 0.02) << ',' << 0.001 * d << '\n';
            opens << date << ',' << 100 + d << ',' << 50 + d << '\n';
            closes << date << ',' << 100.5 + d << ',' << 50.5 + d << '\n';
            if (d != 4) iv << date << ',' << 20 + d << ',' << 30 + d << '\n';
        }
        write("rv.csv", rv.str());
        write("returns.csv", ret.str());
        write("opens.csv", opens.str());
        write("closes.csv", closes.str());
        write("iv.csv", iv.str());
    }

    fs::path dir_;
};

TEST_F(CliTest, UsageErrors) {
    EXPECT_EQ(volnet({}).code, 2);
    EXPECT_EQ(volnet({"frobnicate"}).code, 2);
    EXPECT_EQ(volnet({"backtest"}).code, 2);  // --config is required
    EXPECT_EQ(volnet({"backtest", "--config", (dir_ / "missing.json").string()}).code, 2);
    EXPECT_EQ(volnet({"--help"}).code, 0);
}

TEST_F(CliTest, IngestWritesAlignedPanels) {
    write_raw_inputs();
    const auto cfg = write("ingest.json",
                           R"({"rv":"rv.csv","returns":"returns.csv","opens":"opens.csv","closes":"closes.csv",)"
                           R"("iv":"iv.csv","out":"panels"})");
    const auto r = volnet({"ingest", "--config", cfg.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    for (const char* name : {"log_rv", "returns", "good", "bad", "on", "iv"})
        EXPECT_TRUE(fs::exists(dir_ / "panels" / (std::string(name) + ".csv"))) << name;
    EXPECT_TRUE(fs::exists(dir_ / "panels" / "alignment_report.json"));
    EXPECT_TRUE(fs::exists(dir_ / "panels" / "resolved_config.json"));
    // the first date has no overnight return and 2021-03-04 has no IV
    const std::string log_rv = testing::slurp(dir_ / "panels" / "log_rv.csv");
    EXPECT_EQ(log_rv.rfind("date,A,B\n2021-03-02,", 0), 0u) << log_rv;
    EXPECT_EQ(log_rv.find("2021-03-04"), std::string::npos);
    EXPECT_EQ(std::count(log_rv.begin(), log_rv.end(), '\n'), 8);
    const std::string ret = testing::slurp(dir_ / "panels" / "returns.csv");
    EXPECT_EQ(ret.rfind("date,A,B\n", 0), 0u);  // reordered to the response's node order
    EXPECT_NE(r.out.find("dropped 2 dates"), std::string::npos) << r.out;
}

TEST_F(CliTest, IngestRejectsBadInputs) {
    write_raw_inputs();
    write("short.csv", "date,A,B\n2021-03-01,1\n");
    auto cfg = write("a.json", R"({"rv":"short.csv","out":"o"})");
    EXPECT_EQ(volnet({"ingest", "--config", cfg.string()}).code, 2);

    write("other.csv", "date,A,B\n2030-01-01,1,2\n");
    cfg = write("b.json", R"({"rv":"rv.csv","iv":"other.csv","out":"o"})");
    const auto r = volnet({"ingest", "--config", cfg.string()});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("share no dates"), std::string::npos) << r.err;

    write("wrong_nodes.csv", "date,A,C\n2021-03-01,1,2\n");
    cfg = write("c.json", R"({"rv":"rv.csv","iv":"wrong_nodes.csv","out":"o"})");
    EXPECT_EQ(volnet({"ingest", "--config", cfg.string()}).code, 2);

    cfg = write("d.json", R"({"rv":"rv.csv","opens":"opens.csv","out":"o"})");
    EXPECT_EQ(volnet({"ingest", "--config", cfg.string()}).code, 2);
}

fs::path simulate_small(const fs::path& dir, std::uint64_t seed, const std::string& extra = "") {
    std::ostringstream cfg;
    cfg << R"({"n_nodes":3,"length":260,"burn_in":50,"seed":)" << seed
        << R"(,"model":{"variant":"global","stages":[1,1,1],"exog":[{"name":"iv","lags":[1]}]},)"
        << R"("coefficients":{"alpha_d":0.3,"alpha_w":0.2,"alpha_m":0.1,"beta_d_1":0.1,"beta_w_1":0.05,)"
        << R"("beta_m_1":0.05,"lambda_iv_1":0.2},"noise_std":0.5,"offset":-8,)"
        << R"("exog":{"iv":{"phi":0.6,"noise_std":1}},"returns":{"network":{"edges":[[0,1]]}})" << extra << "}";
    testing::spit(dir / "sim.json", cfg.str());
    return dir / "sim.json";
}

TEST_F(CliTest, SimulateIsDeterministicAndSeeded) {
    const auto cfg = simulate_small(dir_, 5);
    ASSERT_EQ(volnet({"simulate", "--config", cfg.string(), "--out", (dir_ / "a").string()}).code, 0);
    ASSERT_EQ(volnet({"simulate", "--config", cfg.string(), "--out", (dir_ / "b").string()}).code, 0);
    ASSERT_EQ(volnet({"simulate", "--config", cfg.string(), "--out", (dir_ / "c").string(), "--seed", "6"}).code, 0);
    for (const char* f : {"log_rv.csv", "iv.csv", "returns.csv", "truth.json"})
        EXPECT_EQ(testing::slurp(dir_ / "a" / f), testing::slurp(dir_ / "b" / f)) << f;
    EXPECT_NE(testing::slurp(dir_ / "a" / "log_rv.csv"), testing::slurp(dir_ / "c" / "log_rv.csv"));
    EXPECT_NE(testing::slurp(dir_ / "c" / "resolved_config.json").find("\"seed\": 6"), std::string::npos);
}

TEST_F(CliTest, SimulateRejectsNonStationaryCoefficients) {
    write("bad.json", R"({"n_nodes":2,"length":50,"model":{"variant":"global","stages":[0,0,0]},)"
                      R"("coefficients":{"alpha_d":0.6,"alpha_w":0.3,"alpha_m":0.2},"out":"o"})");
    const auto r = volnet({"simulate", "--config", (dir_ / "bad.json").string()});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("1.1"), std::string::npos) << r.err;

    write("missing.json", R"({"n_nodes":2,"length":50,"model":{"variant":"global","stages":[0,0,0]},)"
                          R"("coefficients":{"alpha_d":0.1},"out":"o"})");
    EXPECT_EQ(volnet({"simulate", "--config", (dir_ / "missing.json").string()}).code, 2);
}

std::string backtest_config(const std::string& rolling, const std::string& models) {
    return R"({"data":{"log_rv":"sim/log_rv.csv","returns":"sim/returns.csv","exog":{"iv":"sim/iv.csv"}},"rolling":)" +
           rolling + R"(,"models":)" + models + R"(,"out":"bt"})";
}

TEST_F(CliTest, BacktestTwoModelsAndEvaluate) {
    ASSERT_EQ(volnet({"simulate", "--config", simulate_small(dir_, 1).string(), "--out", (dir_ / "sim").string()}).code, 0);
    const auto cfg = write("bt.json", backtest_config(
        R"({"initial_window":200,"refit_window":150,"block":22})",
        R"([{"label":"global_fc","variant":"global","network":"FC","exog":["iv"]},
            {"label":"local_gl","variant":"local","network":"GL"}])"));
    const auto r = volnet({"backtest", "--config", cfg.string(), "--threads", "2"});
    ASSERT_EQ(r.code, 0) << r.err;
    const std::string ranking = testing::slurp(dir_ / "bt" / "ranking.csv");
    EXPECT_EQ(std::count(ranking.begin(), ranking.end(), '\n'), 3);
    for (const char* f : {"forecasts.csv", "coefficients.csv", "residual_var.csv", "meta.json"})
        EXPECT_TRUE(fs::exists(dir_ / "bt" / "local_gl" / f)) << f;
    EXPECT_FALSE(fs::exists(dir_ / "bt" / "local_gl.partial"));
    EXPECT_EQ(std::distance(fs::directory_iterator(dir_ / "bt" / "local_gl" / "networks"), fs::directory_iterator{}), 3);

    const auto ev = write("ev.json", R"({"results":"bt","out":"ev"})");
    const auto e = volnet({"evaluate", "--config", ev.string()});
    ASSERT_EQ(e.code, 0) << e.err;
    EXPECT_EQ(testing::slurp(dir_ / "ev" / "ranking.csv"), ranking);
    EXPECT_TRUE(fs::exists(dir_ / "ev" / "losses_by_node.csv"));

    const auto ns = volnet({"network-stats", "--networks", (dir_ / "bt" / "global_fc" / "networks").string()});
    ASSERT_EQ(ns.code, 0) << ns.err;
    EXPECT_NE(ns.out.find(",3,1\n"), std::string::npos) << ns.out;
}

TEST_F(CliTest, BacktestConfigAndEstimationErrors) {
    ASSERT_EQ(volnet({"simulate", "--config", simulate_small(dir_, 2).string(), "--out", (dir_ / "sim").string()}).code, 0);
    auto cfg = write("bad_windows.json", backtest_config(R"({"initial_window":150,"refit_window":200,"block":22})",
                                                         R"([{"label":"m","variant":"global"}])"));
    EXPECT_EQ(volnet({"backtest", "--config", cfg.string()}).code, 2);

    cfg = write("dup.json", backtest_config(R"({"initial_window":200,"refit_window":150})",
                                            R"([{"label":"m"},{"label":"m"}])"));
    EXPECT_EQ(volnet({"backtest", "--config", cfg.string()}).code, 2);

    cfg = write("noexog.json", backtest_config(R"({"initial_window":200,"refit_window":150})",
                                               R"([{"label":"m","exog":["on"]}])"));
    EXPECT_EQ(volnet({"backtest", "--config", cfg.string()}).code, 2);

    // a node whose log RV is flat through the second training window
    std::string text = testing::slurp(dir_ / "sim" / "log_rv.csv");
    std::istringstream in(text);
    std::ostringstream flat;
    std::string line;
    int row = -1;
    std::string second_refit;
    while (std::getline(in, line)) {
        if (row >= 60) line = line.substr(0, line.find(',')) + ",-8" + line.substr(line.find(',', line.find(',') + 1));
        if (row == 199) second_refit = line.substr(0, line.find(','));
        flat << line << '\n';
        ++row;
    }
    testing::spit(dir_ / "sim" / "log_rv.csv", flat.str());
    cfg = write("flat.json", backtest_config(R"({"initial_window":200,"refit_window":150})",
                                             R"([{"label":"m","variant":"global","exog":["iv"]}])"));
    const auto r = volnet({"backtest", "--config", cfg.string()});
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.err.find("refit " + second_refit), std::string::npos) << r.err;
}

TEST_F(CliTest, NetworkStatsHandBuiltSequence) {
    fs::create_directories(dir_ / "nets");
    write("nets/2020-01-01.json", R"({"nodes":["a","b","c"],"edges":[[0,1],[0,2]]})");
    write("nets/2020-02-01.json", R"({"nodes":["a","b","c"],"edges":[[0,1],[1,2]]})");
    write("nets/2020-03-01.json", R"({"nodes":["a","b","c"],"edges":[[0,1],[1,2]]})");
    auto r = volnet({"network-stats", "--networks", (dir_ / "nets").string(), "--out", (dir_ / "ns").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(testing::slurp(dir_ / "ns" / "network_stats.csv"),
              "refit_date,edge_count,jaccard_vs_previous\n"
              "2020-01-01,2,\n"
              "2020-02-01,2,0.3333333333333333\n"
              "2020-03-01,2,1\n");

    fs::create_directories(dir_ / "one");
    write("one/2020-01-01.json", R"({"nodes":["a","b"],"edges":[]})");
    r = volnet({"network-stats", "--networks", (dir_ / "one").string()});
    EXPECT_EQ(r.out, "refit_date,edge_count,jaccard_vs_previous\n2020-01-01,0,\n");

    write("nets/2020-04-01.json", "{not json");
    EXPECT_EQ(volnet({"network-stats", "--networks", (dir_ / "nets").string()}).code, 2);
    EXPECT_EQ(volnet({"network-stats", "--networks", (dir_ / "absent").string()}).code, 2);
}

}  // namespace
}  // namespace volnet
