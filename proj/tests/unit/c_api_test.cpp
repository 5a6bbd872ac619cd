#include "synthetic.hpp"

#include "futsmile/futsmile.h"

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

class CApi : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        dir_ = fstest::scratch_dir("c_api");
        fstest::SyntheticSpec spec;
        spec.expiry_days = {60, 180, 365};
        fstest::write_market(fstest::synthetic_market(spec), dir_ / "mkt");
    }
    static std::filesystem::path dir_;
};

std::filesystem::path CApi::dir_;

}  // namespace

TEST_F(CApi, ErrorsAreReportedNotThrown) {
    fsm_market* m = nullptr;
    EXPECT_EQ(fsm_market_load((dir_ / "nope").c_str(), 1, &m), FSM_ERR_IO);
    EXPECT_EQ(m, nullptr);
    EXPECT_NE(std::string(fsm_last_error()).find("cannot open"), std::string::npos);
    EXPECT_EQ(fsm_market_load(nullptr, 1, &m), FSM_ERR_INVALID);
    double vol = 0.0;
    EXPECT_EQ(fsm_implied_vol(0.0, 1.0, 100.0, 100.0, 0, 1.0, &vol), FSM_ERR_INVALID);
    fsm_model* model = nullptr;
    {
        std::ofstream f(dir_ / "bad.json");
        f << R"({"schema":"futsmile-model","version":7})";
    }
    EXPECT_EQ(fsm_model_load((dir_ / "bad.json").c_str(), &model), FSM_ERR_SCHEMA);
}

TEST_F(CApi, CalibratePriceSaveLoad) {
    fsm_market* market = nullptr;
    ASSERT_EQ(fsm_market_load((dir_ / "mkt").c_str(), 1, &market), FSM_OK);
    EXPECT_EQ(fsm_market_quote_count(market), 21u);
    fsm_calibration_options opts;
    fsm_calibration_options_default(&opts);
    const double a = 0.5;
    fsm_model* model = nullptr;
    fsm_report* report = nullptr;
    ASSERT_EQ(fsm_calibrate(market, nullptr, 0, &a, 1, &opts, &model, &report), FSM_OK) << fsm_last_error();
    EXPECT_EQ(fsm_report_converged(report), 1);
    EXPECT_LE(fsm_report_final_max_bp(report), 0.1);
    EXPECT_EQ(fsm_report_history_size(report), static_cast<size_t>(fsm_report_iterations(report)) + 1);

    double T = 0.0, F0 = 0.0, price = 0.0, vol = 0.0;
    ASSERT_EQ(fsm_model_contract_t_last(model, "C2", &T), FSM_OK);
    ASSERT_EQ(fsm_model_forward(model, T, &F0), FSM_OK);
    ASSERT_EQ(fsm_price_vanilla(model, 0.3, "C2", 0.0, 0, 0, &price, &vol), FSM_OK);
    EXPECT_NEAR(price, F0, 1e-10 * F0);
    EXPECT_TRUE(std::isnan(vol));
    ASSERT_EQ(fsm_price_vanilla(model, 0.3, "C2", F0, 0, 0, &price, &vol), FSM_OK);
    double back = 0.0;
    ASSERT_EQ(fsm_implied_vol(price, 0.3, F0, F0, 0, 1.0, &back), FSM_OK);
    EXPECT_NEAR(back, vol, 1e-12);
    EXPECT_EQ(fsm_price_vanilla(model, 0.3, "C9", F0, 0, 0, &price, &vol), FSM_ERR_INVALID);

    const auto path = (dir_ / "model.json").string();
    ASSERT_EQ(fsm_model_save(model, path.c_str()), FSM_OK);
    fsm_model* loaded = nullptr;
    ASSERT_EQ(fsm_model_load(path.c_str(), &loaded), FSM_OK);
    double p1 = 0.0, p2 = 0.0;
    ASSERT_EQ(fsm_price_cso(model, 0.3, "C2", "C3", -1.0, &p1, nullptr), FSM_OK);
    ASSERT_EQ(fsm_price_cso(loaded, 0.3, "C2", "C3", -1.0, &p2, nullptr), FSM_OK);
    EXPECT_EQ(p1, p2);

    ASSERT_EQ(fsm_report_write_csv(report, (dir_ / "report.csv").c_str()), FSM_OK);
    EXPECT_EQ(slurp(dir_ / "report.csv").rfind("iteration,max_bp,rms_bp", 0), 0u);

    fsm_model_free(loaded);
    fsm_model_free(model);
    fsm_report_free(report);
    fsm_market_free(market);
}

TEST_F(CApi, NonConvergenceStillReturnsArtifacts) {
    fsm_market* market = nullptr;
    ASSERT_EQ(fsm_market_load((dir_ / "mkt").c_str(), 1, &market), FSM_OK);
    fsm_calibration_options opts;
    fsm_calibration_options_default(&opts);
    opts.max_iterations = 1;
    const double a = 0.5;
    fsm_model* model = nullptr;
    fsm_report* report = nullptr;
    EXPECT_EQ(fsm_calibrate(market, nullptr, 0, &a, 1, &opts, &model, &report), FSM_ERR_NOT_CONVERGED);
    ASSERT_NE(model, nullptr);
    ASSERT_NE(report, nullptr);
    EXPECT_EQ(fsm_report_converged(report), 0);
    EXPECT_EQ(fsm_report_history_size(report), 2u);
    fsm_model_free(model);
    fsm_report_free(report);
    fsm_market_free(market);
}

TEST_F(CApi, SimulationIsDeterministic) {
    fsm_market* market = nullptr;
    ASSERT_EQ(fsm_market_load((dir_ / "mkt").c_str(), 1, &market), FSM_OK);
    fsm_calibration_options opts;
    fsm_calibration_options_default(&opts);
    const double a = 0.5;
    fsm_model* model = nullptr;
    fsm_report* report = nullptr;
    ASSERT_EQ(fsm_calibrate(market, nullptr, 0, &a, 1, &opts, &model, &report), FSM_OK);
    fsm_simulation_options so;
    fsm_simulation_options_default(&so);
    so.xi = 0.4;
    so.rho_v = 0.2;
    so.n_paths = 4000;
    so.seed = 7;
    std::string out[2];
    for (int i = 0; i < 2; ++i) {
        fsm_simulation* sim = nullptr;
        ASSERT_EQ(fsm_simulate(model, &so, &sim), FSM_OK) << fsm_last_error();
        const auto p = dir_ / ("diag" + std::to_string(i) + ".csv");
        ASSERT_EQ(fsm_simulation_write_diagnostics(sim, p.c_str()), FSM_OK);
        out[i] = slurp(p);
        fsm_simulation_free(sim);
    }
    EXPECT_EQ(out[0], out[1]);
    EXPECT_FALSE(out[0].empty());
    so.rho_v = 0.9;
    fsm_simulation* sim = nullptr;
    EXPECT_EQ(fsm_simulate(model, &so, &sim), FSM_ERR_INVALID);
    fsm_model_free(model);
    fsm_report_free(report);
    fsm_market_free(market);
}
