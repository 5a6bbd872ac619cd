#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace futsmile {

using Date = std::chrono::year_month_day;

/// Parses YYYY-MM-DD.
Date parse_iso_date(std::string_view text);
std::string format_iso_date(Date d);

/// ACT/365 fixed year fraction; negative when `to` precedes `from`.
double year_fraction(Date from, Date to);

/// Adds weekdays, skipping Saturdays and Sundays (no holiday calendar).
Date add_business_days(Date d, int n);

inline constexpr const char* kDayCount = "ACT/365F";

/// Trading, notification, delivery and option dates of one futures contract.
struct ContractCalendar {
    std::string id;
    Date first_trade;
    Date last_trade;
    Date first_notice;
    Date last_notice;
    Date first_delivery;
    Date last_delivery;
    Date option_expiry;
    std::optional<Date> option_payment;

    /// Last date the futures price is treated as a martingale: min(first notice, last trade).
    [[nodiscard]] Date last_date() const;
    /// Option premium payment date, defaulting to expiry + 2 business days.
    [[nodiscard]] Date payment_date() const;

    /// Throws Error(date_order) when the calendar is inconsistent.
    void validate() const;
};

struct CurvePillar {
    double t;
    double value;
};

/// Futures term structure F_0(T), log-linear between pillars, no extrapolation.
class FuturesCurve {
public:
    FuturesCurve() = default;
    explicit FuturesCurve(std::vector<CurvePillar> pillars);

    /// Price at year fraction T; throws out_of_range outside [first, last] pillar.
    [[nodiscard]] double operator()(double T) const;

    [[nodiscard]] std::span<const CurvePillar> pillars() const { return pillars_; }
    [[nodiscard]] double front_time() const { return pillars_.front().t; }
    [[nodiscard]] double back_time() const { return pillars_.back().t; }

private:
    std::vector<CurvePillar> pillars_;
};

/// Collateral discount factors P_0(T;e), log-linear, P_0(0)=1.
class DiscountCurve {
public:
    DiscountCurve();
    DiscountCurve(std::vector<CurvePillar> pillars, bool enforce_monotone = true, std::string rate_id = "e");

    [[nodiscard]] double df(double T) const;
    [[nodiscard]] std::span<const CurvePillar> pillars() const { return pillars_; }
    [[nodiscard]] const std::string& rate_id() const { return rate_id_; }

private:
    std::vector<CurvePillar> pillars_;
    std::string rate_id_;
};

enum class MarginStyle { future, equity };
enum class StrikeType { absolute, delta };

std::string_view to_string(MarginStyle s);
MarginStyle parse_margin_style(std::string_view s);

struct VolQuote {
    double expiry = 0.0;          ///< option expiry, year fraction
    std::string contract;
    double strike_or_delta = 0.0; ///< as given in the file
    StrikeType strike_type = StrikeType::absolute;
    double vol = 0.0;             ///< Black implied volatility of the futures option
    MarginStyle style = MarginStyle::future;

    // Resolved at load time.
    double strike = 0.0;          ///< absolute strike
    double t_last = 0.0;          ///< contract T^last, year fraction
    double payment = 0.0;         ///< premium payment time T_p, year fraction
};

struct VolQuoteSet {
    std::vector<VolQuote> rows;
};

struct MarketData {
    Date valuation_date{};
    FuturesCurve futures;
    DiscountCurve discount;
    std::vector<ContractCalendar> calendars;
    VolQuoteSet quotes;

    [[nodiscard]] const ContractCalendar& contract(std::string_view id) const;
    [[nodiscard]] double t_last(std::string_view id) const;
    [[nodiscard]] double time_of(Date d) const { return year_fraction(valuation_date, d); }
};

struct LoadOptions {
    bool enforce_monotone_discount = true;
};

/// Reads futures.csv, discount.csv, quotes.csv and calendars.csv from `dir`.
MarketData load_market(const std::filesystem::path& dir, const LoadOptions& options = {});

/// Strike whose premium-excluded Black call delta Phi(d1) equals `delta`.
double delta_to_strike(double delta, double t, double F0, double sigma);
double strike_to_delta(double K, double t, double F0, double sigma);

/// Minimal CSV helpers shared by loaders; '#' lines are metadata/comments.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;
    std::vector<std::pair<std::string, std::string>> metadata;  ///< "# key: value" lines

    [[nodiscard]] std::size_t column(std::string_view name) const;
    [[nodiscard]] std::optional<std::size_t> find_column(std::string_view name) const;
};

CsvTable read_csv(const std::filesystem::path& path);
double parse_double(std::string_view text, std::string_view context);

/// Accepts a decimal year fraction or an ISO date relative to `valuation`.
double parse_time(std::string_view text, Date valuation, std::string_view context);

}  // namespace futsmile
