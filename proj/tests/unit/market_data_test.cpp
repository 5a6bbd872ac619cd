#include "expect_error.hpp"
#include "synthetic.hpp"

#include "futsmile/market_data.hpp"

#include <cmath>
#include <fstream>

using namespace futsmile;

TEST(FuturesCurve, EchoesPillars) {
    FuturesCurve c({{0.25, 100.0}, {0.5, 101.0}});
    ASSERT_EQ(c.pillars().size(), 2u);
    EXPECT_DOUBLE_EQ(c(0.25), 100.0);
    EXPECT_DOUBLE_EQ(c(0.5), 101.0);
}

TEST(FuturesCurve, FlatCurve) {
    FuturesCurve c({{0.1, 100.0}, {1.0, 100.0}, {2.0, 100.0}});
    for (double T : {0.1, 0.33, 1.7, 2.0}) EXPECT_DOUBLE_EQ(c(T), 100.0);
}

TEST(FuturesCurve, LogLinearBetweenPillars) {
    FuturesCurve c({{0.25, 100.0}, {0.75, 104.0}});
    EXPECT_NEAR(c(0.5), 100.0 * std::sqrt(1.04), 1e-12);
    EXPECT_NEAR(c(0.5), 101.980, 5e-4);
}

TEST(FuturesCurve, NoExtrapolation) {
    FuturesCurve c({{0.25, 100.0}, {0.75, 104.0}});
    EXPECT_FSM_ERROR(c(1.0), ErrorCode::out_of_range);
    EXPECT_FSM_ERROR(c(0.1), ErrorCode::out_of_range);
}

TEST(FuturesCurve, RejectsBadPillars) {
    EXPECT_FSM_ERROR(FuturesCurve({{0.5, 100.0}, {0.25, 101.0}}), ErrorCode::invalid_input);
    EXPECT_FSM_ERROR(FuturesCurve({{0.5, -1.0}}), ErrorCode::invalid_input);
}

TEST(DiscountCurve, StartsAtOneAndInterpolatesLogLinearly) {
    DiscountCurve d({{1.0, 0.97}, {2.0, 0.94}});
    EXPECT_DOUBLE_EQ(d.df(0.0), 1.0);
    EXPECT_NEAR(d.df(0.5), std::sqrt(0.97), 1e-14);
    EXPECT_NEAR(d.df(1.5), std::sqrt(0.97 * 0.94), 1e-14);
}

TEST(DiscountCurve, MonotonicityIsConfigurable) {
    EXPECT_FSM_ERROR(DiscountCurve({{1.0, 0.97}, {2.0, 0.98}}), ErrorCode::invalid_input);
    DiscountCurve relaxed({{1.0, 0.97}, {2.0, 0.98}}, false);
    EXPECT_DOUBLE_EQ(relaxed.df(2.0), 0.98);
}

TEST(Calendar, LastDateIsEarlierOfNoticeAndTrade) {
    ContractCalendar c;
    c.id = "X";
    c.first_trade = parse_iso_date("2024-01-02");
    c.last_trade = parse_iso_date("2025-03-20");
    c.first_notice = parse_iso_date("2025-03-18");
    c.last_notice = parse_iso_date("2025-03-25");
    c.first_delivery = parse_iso_date("2025-03-26");
    c.last_delivery = parse_iso_date("2025-04-30");
    c.option_expiry = parse_iso_date("2025-03-10");
    EXPECT_EQ(c.last_date(), c.first_notice);
    EXPECT_EQ(c.payment_date(), parse_iso_date("2025-03-12"));
    c.validate();
}

TEST(Calendar, NoticeBeforeFirstTradeIsDateOrderError) {
    ContractCalendar c;
    c.id = "X";
    c.first_trade = parse_iso_date("2025-06-01");
    c.last_trade = parse_iso_date("2025-07-01");
    c.first_notice = parse_iso_date("2025-05-01");
    c.last_notice = parse_iso_date("2025-07-05");
    c.first_delivery = parse_iso_date("2025-07-06");
    c.last_delivery = parse_iso_date("2025-08-01");
    c.option_expiry = parse_iso_date("2025-06-20");
    EXPECT_FSM_ERROR(c.validate(), ErrorCode::date_order);
}

TEST(Delta, AtmDeltaMapsToForward) {
    const double t = 0.75, F0 = 80.0, s = 0.3;
    EXPECT_NEAR(delta_to_strike(0.5 * (1.0 + std::erf(s * std::sqrt(t) / 2.0 / std::sqrt(2.0))), t, F0, s), F0, 1e-10);
}

TEST(Delta, ShortTimeHalfDeltaApproachesForward) {
    EXPECT_NEAR(delta_to_strike(0.5, 1e-10, 100.0, 0.2), 100.0, 1e-5);
}

TEST(Delta, RoundTrip) {
    for (double K : {60.0, 80.0, 95.0, 100.0, 130.0}) {
        const double d = strike_to_delta(K, 0.5, 100.0, 0.25);
        EXPECT_NEAR(delta_to_strike(d, 0.5, 100.0, 0.25), K, 1e-10 * K);
    }
}

TEST(ParseTime, DatesAndFractions) {
    const Date v = parse_iso_date("2025-01-01");
    EXPECT_DOUBLE_EQ(parse_time("0.25", v, "x"), 0.25);
    EXPECT_DOUBLE_EQ(parse_time("2026-01-01", v, "x"), 1.0);
    EXPECT_FSM_ERROR(parse_time("2025-13-01", v, "x"), ErrorCode::parse);
}

class MarketFiles : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fstest::scratch_dir("market_files");
        fstest::SyntheticSpec spec;
        spec.expiry_days = {60, 120};
        fstest::write_market(fstest::flat_market(0.25, spec), dir_);
    }
    void rewrite_first_quote_vol(const std::string& vol) {
        std::ifstream in(dir_ / "quotes.csv");
        std::string header, first, rest, line;
        std::getline(in, header);
        std::getline(in, first);
        while (std::getline(in, line)) rest += line + "\n";
        auto cells = first;
        // vol is the fifth field
        std::size_t pos = 0;
        for (int i = 0; i < 4; ++i) pos = cells.find(',', pos) + 1;
        const std::size_t end = cells.find(',', pos);
        cells = cells.substr(0, pos) + vol + cells.substr(end);
        std::ofstream out(dir_ / "quotes.csv");
        out << header << "\n" << cells << "\n" << rest;
    }
    std::filesystem::path dir_;
};

TEST_F(MarketFiles, LoadsAndResolves) {
    const MarketData m = load_market(dir_);
    EXPECT_EQ(m.calendars.size(), 2u);
    EXPECT_EQ(m.quotes.rows.size(), 14u);
    for (const auto& q : m.quotes.rows) {
        EXPECT_DOUBLE_EQ(q.vol, 0.25);
        EXPECT_GT(q.t_last, q.expiry);
        EXPECT_DOUBLE_EQ(q.t_last, m.t_last(q.contract));
    }
}

TEST_F(MarketFiles, NegativeVolIsRejected) {
    rewrite_first_quote_vol("-0.1");
    EXPECT_FSM_ERROR(load_market(dir_), ErrorCode::invalid_input);
}

TEST_F(MarketFiles, MissingFileIsIoError) {
    std::filesystem::remove(dir_ / "quotes.csv");
    EXPECT_FSM_ERROR(load_market(dir_), ErrorCode::io);
}
