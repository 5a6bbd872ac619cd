#include "futsmile/market_data.hpp"

#include "futsmile/error.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace futsmile {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string> split_row(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(',', start);
        out.emplace_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

double log_linear(std::span<const CurvePillar> p, double T) {
    auto it = std::upper_bound(p.begin(), p.end(), T, [](double x, const CurvePillar& q) { return x < q.t; });
    if (it == p.begin()) return p.front().value;
    if (it == p.end()) return p.back().value;
    const auto& hi = *it;
    const auto& lo = *(it - 1);
    const double w = (T - lo.t) / (hi.t - lo.t);
    return std::exp((1.0 - w) * std::log(lo.value) + w * std::log(hi.value));
}

std::string where(const std::filesystem::path& file, std::size_t line) {
    return file.filename().string() + ":" + std::to_string(line);
}

}  // namespace

Date parse_iso_date(std::string_view text) {
    text = trim(text);
    int y = 0;
    unsigned m = 0, d = 0;
    auto bad = [&] { fail(ErrorCode::parse, "invalid ISO-8601 date '" + std::string(text) + "'"); };
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') bad();
    if (std::from_chars(text.data(), text.data() + 4, y).ec != std::errc{}) bad();
    if (std::from_chars(text.data() + 5, text.data() + 7, m).ec != std::errc{}) bad();
    if (std::from_chars(text.data() + 8, text.data() + 10, d).ec != std::errc{}) bad();
    Date date{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
    if (!date.ok()) bad();
    return date;
}

std::string format_iso_date(Date d) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()), static_cast<unsigned>(d.month()),
                  static_cast<unsigned>(d.day()));
    return buf;
}

double year_fraction(Date from, Date to) {
    const auto days = (std::chrono::sys_days{to} - std::chrono::sys_days{from}).count();
    return static_cast<double>(days) / 365.0;
}

Date add_business_days(Date d, int n) {
    std::chrono::sys_days day{d};
    while (n > 0) {
        day += std::chrono::days{1};
        const std::chrono::weekday wd{day};
        if (wd != std::chrono::Saturday && wd != std::chrono::Sunday) --n;
    }
    return Date{day};
}

Date ContractCalendar::last_date() const { return std::min(first_notice, last_trade); }

Date ContractCalendar::payment_date() const { return option_payment ? *option_payment : add_business_days(option_expiry, 2); }

void ContractCalendar::validate() const {
    auto bad = [&](const std::string& msg) { fail(ErrorCode::date_order, "contract " + id + ": " + msg); };
    if (!(first_trade < last_trade)) bad("first_trade must precede last_trade");
    if (option_expiry > last_date()) bad("option_expiry after min(first_notice, last_trade)");
    if (first_delivery > last_delivery) bad("first_delivery after last_delivery");
    if (first_notice > last_notice) bad("first_notice after last_notice");
    if (option_payment && *option_payment < option_expiry) bad("option_payment before option_expiry");
}

FuturesCurve::FuturesCurve(std::vector<CurvePillar> pillars) : pillars_(std::move(pillars)) {
    if (pillars_.empty()) fail(ErrorCode::invalid_input, "futures curve needs at least one pillar");
    for (std::size_t i = 0; i < pillars_.size(); ++i) {
        if (!(pillars_[i].value > 0.0) || !std::isfinite(pillars_[i].value))
            fail(ErrorCode::invalid_input, "futures price must be positive (pillar " + std::to_string(i) + ")");
        if (!(pillars_[i].t >= 0.0)) fail(ErrorCode::invalid_input, "futures pillar time must be non-negative");
        if (i > 0 && !(pillars_[i].t > pillars_[i - 1].t))
            fail(ErrorCode::invalid_input, "futures pillars must be strictly increasing in T");
    }
}

double FuturesCurve::operator()(double T) const {
    constexpr double eps = 1e-12;
    if (T < pillars_.front().t - eps || T > pillars_.back().t + eps) {
        std::ostringstream os;
        os << "futures curve extrapolation requested at T=" << T << " outside [" << pillars_.front().t << ", "
           << pillars_.back().t << "]";
        fail(ErrorCode::out_of_range, os.str());
    }
    return log_linear(pillars_, T);
}

DiscountCurve::DiscountCurve() : pillars_{{0.0, 1.0}}, rate_id_("e") {}

DiscountCurve::DiscountCurve(std::vector<CurvePillar> pillars, bool enforce_monotone, std::string rate_id)
    : pillars_(std::move(pillars)), rate_id_(std::move(rate_id)) {
    if (pillars_.empty() || pillars_.front().t > 0.0) pillars_.insert(pillars_.begin(), CurvePillar{0.0, 1.0});
    if (std::abs(pillars_.front().value - 1.0) > 1e-12)
        fail(ErrorCode::invalid_input, "discount factor at T=0 must equal 1");
    for (std::size_t i = 0; i < pillars_.size(); ++i) {
        const double df = pillars_[i].value;
        if (!(df > 0.0) || !std::isfinite(df)) fail(ErrorCode::invalid_input, "discount factor must be positive");
        if (i > 0) {
            if (!(pillars_[i].t > pillars_[i - 1].t))
                fail(ErrorCode::invalid_input, "discount pillars must be strictly increasing in T");
            if (enforce_monotone && df > pillars_[i - 1].value)
                fail(ErrorCode::invalid_input, "discount factors must be non-increasing in T (pillar " +
                                                   std::to_string(i) + ")");
        }
        if (enforce_monotone && df > 1.0) fail(ErrorCode::invalid_input, "discount factor above 1");
    }
}

double DiscountCurve::df(double T) const {
    if (T < -1e-12 || T > pillars_.back().t + 1e-12) {
        std::ostringstream os;
        os << "discount factor requested at T=" << T << " outside [0, " << pillars_.back().t << "]";
        fail(ErrorCode::out_of_range, os.str());
    }
    return log_linear(pillars_, T);
}

std::string_view to_string(MarginStyle s) { return s == MarginStyle::future ? "future" : "equity"; }

MarginStyle parse_margin_style(std::string_view s) {
    s = trim(s);
    if (s == "future" || s == "future-style" || s == "futures") return MarginStyle::future;
    if (s == "equity" || s == "equity-style") return MarginStyle::equity;
    fail(ErrorCode::parse, "unknown margining style '" + std::string(s) + "'");
}

const ContractCalendar& MarketData::contract(std::string_view id) const {
    auto it = std::find_if(calendars.begin(), calendars.end(), [&](const auto& c) { return c.id == id; });
    if (it == calendars.end()) fail(ErrorCode::invalid_input, "unknown contract '" + std::string(id) + "'");
    return *it;
}

double MarketData::t_last(std::string_view id) const { return time_of(contract(id).last_date()); }

std::size_t CsvTable::column(std::string_view name) const {
    if (auto c = find_column(name)) return *c;
    fail(ErrorCode::parse, "missing CSV column '" + std::string(name) + "'");
}

std::optional<std::size_t> CsvTable::find_column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    return std::nullopt;
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::io, "cannot open file '" + path.string() + "'");
    CsvTable table;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view view = trim(line);
        if (view.empty()) continue;
        if (view.front() == '#') {
            view.remove_prefix(1);
            auto colon = view.find_first_of(":=");
            if (colon != std::string_view::npos)
                table.metadata.emplace_back(std::string(trim(view.substr(0, colon))),
                                            std::string(trim(view.substr(colon + 1))));
            continue;
        }
        auto fields = split_row(view);
        if (table.header.empty()) {
            table.header = std::move(fields);
            continue;
        }
        if (fields.size() < table.header.size()) {
            // trailing optional columns may be left out entirely
            fields.resize(table.header.size());
        } else if (fields.size() > table.header.size()) {
            fail(ErrorCode::parse, where(path, lineno) + ": too many fields");
        }
        table.rows.push_back(std::move(fields));
        table.line_numbers.push_back(lineno);
    }
    if (table.header.empty()) fail(ErrorCode::parse, path.filename().string() + ": missing header row");
    return table;
}

double parse_double(std::string_view text, std::string_view context) {
    text = trim(text);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(v))
        fail(ErrorCode::parse, std::string(context) + ": cannot parse number '" + std::string(text) + "'");
    return v;
}

double parse_time(std::string_view text, Date valuation, std::string_view context) {
    text = trim(text);
    if (text.size() == 10 && text[4] == '-' && text[7] == '-') return year_fraction(valuation, parse_iso_date(text));
    return parse_double(text, context);
}

namespace {

std::vector<CurvePillar> read_pillars(const std::filesystem::path& file, std::string_view value_column) {
    auto table = read_csv(file);
    const auto ct = table.column("T");
    const auto cv = table.column(value_column);
    std::vector<CurvePillar> pillars;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto ctx = where(file, table.line_numbers[r]);
        pillars.push_back({parse_double(table.rows[r][ct], ctx + " field T"),
                           parse_double(table.rows[r][cv], ctx + " field " + std::string(value_column))});
    }
    return pillars;
}

}  // namespace

MarketData load_market(const std::filesystem::path& dir, const LoadOptions& options) {
    MarketData market;

    const auto futures_file = dir / "futures.csv";
    auto futures_table = read_csv(futures_file);
    bool have_date = false;
    for (const auto& [key, value] : futures_table.metadata) {
        if (key == "valuation_date") {
            market.valuation_date = parse_iso_date(value);
            have_date = true;
        } else if (key == "day_count" && value != kDayCount && value != "ACT/365") {
            fail(ErrorCode::invalid_input, "unsupported day count '" + value + "' (only ACT/365F)");
        }
    }
    if (!have_date) fail(ErrorCode::parse, "futures.csv: missing '# valuation_date: YYYY-MM-DD' header line");
    try {
        market.futures = FuturesCurve(read_pillars(futures_file, "price"));
    } catch (const Error& e) {
        throw Error(e.code(), "futures.csv: " + std::string(e.what()));
    }

    const auto discount_file = dir / "discount.csv";
    try {
        market.discount = DiscountCurve(read_pillars(discount_file, "df"), options.enforce_monotone_discount);
    } catch (const Error& e) {
        throw Error(e.code(), e.code() == ErrorCode::io ? e.what() : "discount.csv: " + std::string(e.what()));
    }

    const auto cal_file = dir / "calendars.csv";
    auto cal = read_csv(cal_file);
    const char* date_cols[] = {"first_trade", "last_trade", "first_notice", "last_notice",
                               "first_delivery", "last_delivery", "option_expiry"};
    std::size_t idx[7];
    for (int i = 0; i < 7; ++i) idx[i] = cal.column(date_cols[i]);
    const auto cid = cal.column("id");
    const auto cpay = cal.find_column("option_payment");
    std::set<std::string> seen;
    for (std::size_t r = 0; r < cal.rows.size(); ++r) {
        const auto& row = cal.rows[r];
        const auto ctx = where(cal_file, cal.line_numbers[r]);
        ContractCalendar c;
        c.id = row[cid];
        if (c.id.empty()) fail(ErrorCode::parse, ctx + ": empty contract id");
        if (!seen.insert(c.id).second) fail(ErrorCode::invalid_input, ctx + ": duplicate contract '" + c.id + "'");
        try {
            Date* targets[] = {&c.first_trade,    &c.last_trade,    &c.first_notice, &c.last_notice,
                               &c.first_delivery, &c.last_delivery, &c.option_expiry};
            for (int i = 0; i < 7; ++i) *targets[i] = parse_iso_date(row[idx[i]]);
            if (cpay && !row[*cpay].empty()) c.option_payment = parse_iso_date(row[*cpay]);
            c.validate();
        } catch (const Error& e) {
            throw Error(e.code(), ctx + ": " + e.what());
        }
        market.calendars.push_back(std::move(c));
    }

    const auto quotes_file = dir / "quotes.csv";
    auto q = read_csv(quotes_file);
    const auto qe = q.column("expiry"), qc = q.column("contract"), qk = q.column("strike_or_delta"),
               qt = q.column("strike_type"), qv = q.column("vol"), qs = q.column("style");
    std::set<std::tuple<double, std::string, double>> unique;
    for (std::size_t r = 0; r < q.rows.size(); ++r) {
        const auto& row = q.rows[r];
        const auto ctx = where(quotes_file, q.line_numbers[r]);
        try {
            VolQuote quote;
            quote.expiry = parse_time(row[qe], market.valuation_date, "expiry");
            quote.contract = row[qc];
            quote.strike_or_delta = parse_double(row[qk], "strike_or_delta");
            if (row[qt] == "strike" || row[qt] == "absolute") {
                quote.strike_type = StrikeType::absolute;
            } else if (row[qt] == "delta") {
                quote.strike_type = StrikeType::delta;
            } else {
                fail(ErrorCode::parse, "field strike_type: expected 'strike' or 'delta', got '" + row[qt] + "'");
            }
            quote.vol = parse_double(row[qv], "vol");
            quote.style = parse_margin_style(row[qs]);
            if (!(quote.vol > 0.0)) fail(ErrorCode::invalid_input, "field vol: implied volatility must be positive");
            if (!(quote.expiry > 0.0)) fail(ErrorCode::invalid_input, "field expiry: must be after valuation date");
            const auto& contract = market.contract(quote.contract);
            quote.t_last = market.time_of(contract.last_date());
            quote.payment = market.time_of(contract.payment_date());
            if (quote.expiry > quote.t_last + 1e-12)
                fail(ErrorCode::date_order, "field expiry: option expires after contract T^last");
            const double F0 = market.futures(quote.t_last);
            if (quote.strike_type == StrikeType::delta) {
                quote.strike = delta_to_strike(quote.strike_or_delta, quote.expiry, F0, quote.vol);
            } else {
                quote.strike = quote.strike_or_delta;
                if (!(quote.strike > 0.0)) fail(ErrorCode::invalid_input, "field strike_or_delta: strike must be positive");
            }
            if (!unique.emplace(quote.expiry, quote.contract, quote.strike).second)
                fail(ErrorCode::invalid_input, "duplicate quote for (expiry, contract, strike)");
            market.quotes.rows.push_back(std::move(quote));
        } catch (const Error& e) {
            throw Error(e.code(), ctx + ": " + e.what());
        }
    }
    if (market.quotes.rows.empty()) fail(ErrorCode::invalid_input, "quotes.csv: no quotes");
    return market;
}

double delta_to_strike(double delta, double t, double F0, double sigma) {
    if (!(delta > 0.0 && delta < 1.0)) fail(ErrorCode::invalid_input, "call delta must lie in (0,1)");
    if (!(sigma > 0.0) || !(t > 0.0) || !(F0 > 0.0))
        fail(ErrorCode::invalid_input, "delta_to_strike requires positive t, F0 and sigma");
    const double d1 = boost::math::quantile(boost::math::normal_distribution<double>{}, delta);
    const double sd = sigma * std::sqrt(t);
    return F0 * std::exp(-d1 * sd + 0.5 * sd * sd);
}

double strike_to_delta(double K, double t, double F0, double sigma) {
    const double sd = sigma * std::sqrt(t);
    const double d1 = (std::log(F0 / K) + 0.5 * sd * sd) / sd;
    return 0.5 * std::erfc(-d1 / std::sqrt(2.0));
}

}  // namespace futsmile
