#include "expect_error.hpp"
#include "synthetic.hpp"

#include "futsmile/calibration.hpp"
#include "futsmile/model_io.hpp"
#include "futsmile/pricing.hpp"

#include <nlohmann/json.hpp>

using namespace futsmile;

namespace {

const CalibratedSpotModel& calibrated() {
    static const CalibratedSpotModel model = [] {
        fstest::SyntheticSpec spec;
        spec.expiry_days = {60, 180, 365};
        return calibrate(fstest::synthetic_market(spec), MeanReversion({0.3}, {0.4, 0.6}), CalibrationConfig{}).model;
    }();
    return model;
}

}  // namespace

TEST(ModelJson, RoundTripReproducesPrices) {
    const auto& model = calibrated();
    const CalibratedSpotModel back = model_from_json(model_to_json(model));
    EXPECT_EQ(model_to_json(back), model_to_json(model));
    for (const auto& q : model.market().quotes.rows) {
        EXPECT_EQ(price_vanilla_future_style(back, q.expiry, q.t_last, q.strike),
                  price_vanilla_future_style(model, q.expiry, q.t_last, q.strike));
    }
}

TEST(ModelJson, FileRoundTrip) {
    const auto dir = fstest::scratch_dir("model_io");
    save_model(calibrated(), dir / "model.json");
    const auto back = load_model(dir / "model.json");
    EXPECT_EQ(back.local_vol().nodes(), calibrated().local_vol().nodes());
    EXPECT_FSM_ERROR(load_model(dir / "missing.json"), ErrorCode::io);
}

TEST(ModelJson, SchemaMismatch) {
    auto doc = nlohmann::json::parse(model_to_json(calibrated()));
    auto wrong_version = doc;
    wrong_version["version"] = 99;
    EXPECT_FSM_ERROR(model_from_json(wrong_version.dump()), ErrorCode::schema);
    auto missing = doc;
    missing.erase("local_vol");
    EXPECT_FSM_ERROR(model_from_json(missing.dump()), ErrorCode::schema);
    EXPECT_FSM_ERROR(model_from_json("{not json"), ErrorCode::parse);
    auto other = doc;
    other["schema"] = "something-else";
    EXPECT_FSM_ERROR(model_from_json(other.dump()), ErrorCode::schema);
}
