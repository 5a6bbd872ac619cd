#include "synthetic.hpp"

#include "futsmile/black.hpp"
#include "futsmile/spot_model.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>

namespace fstest {

using namespace futsmile;

namespace {

Date shift(Date d, int days) { return Date{std::chrono::sys_days(d) + std::chrono::days(days)}; }

const Date kValuation{std::chrono::year(2025), std::chrono::month(1), std::chrono::day(2)};

}  // namespace

double seasonal_curve(double T) { return 80.0 + 4.0 * std::sin(2.0 * M_PI * T) + 3.0 * T; }

double reference_eta(double t, double k) {
    const double x = std::log(std::max(k, 1e-8));
    const double level = 0.22 + 0.05 * std::exp(-2.0 * t);
    return std::clamp(level * (1.0 - 0.45 * x + 0.6 * x * x), 0.05, 1.5);
}

PdeGridSpec SyntheticSpec::fine_grid() {
    PdeGridSpec g;
    g.strike_intervals = 1600;
    g.dt_max = 1.0 / 1460.0;
    return g;
}

MarketData synthetic_curves(const std::vector<int>& expiry_days, int lag_days, const std::function<double(double)>& futures) {
    MarketData m;
    m.valuation_date = kValuation;
    std::vector<CurvePillar> fut{{0.0, futures(0.0)}};
    for (std::size_t i = 0; i < expiry_days.size(); ++i) {
        ContractCalendar c;
        c.id = "C" + std::to_string(i + 1);
        c.option_expiry = shift(kValuation, expiry_days[i]);
        c.first_trade = shift(kValuation, -400);
        c.last_trade = shift(c.option_expiry, lag_days);
        c.first_notice = shift(c.last_trade, 3);
        c.last_notice = shift(c.first_notice, 5);
        c.first_delivery = shift(c.last_notice, 1);
        c.last_delivery = shift(c.first_delivery, 30);
        const double T = year_fraction(kValuation, c.last_date());
        fut.push_back({T, futures(T)});
        m.calendars.push_back(c);
    }
    m.futures = FuturesCurve(fut);
    std::vector<CurvePillar> disc;
    for (int i = 1; i <= 16; ++i) {
        const double T = 0.25 * i;
        disc.push_back({T, std::exp(-0.03 * T)});
    }
    m.discount = DiscountCurve(disc);
    return m;
}

MarketData synthetic_market(const SyntheticSpec& spec) {
    MarketData m = synthetic_curves(spec.expiry_days, spec.lag_days, spec.futures);
    const MeanReversion a(spec.a);
    std::vector<double> times;
    for (int d : spec.expiry_days) times.push_back(d / 365.0);
    const PdeGrid grid = PdeGrid::build(spec.reference_grid, times, 0.35, 3.0);
    const FunctionLocalVol eta(spec.eta);
    const CallSurface calls = solve_dupire(eta, a, grid);
    for (std::size_t i = 0; i < m.calendars.size(); ++i) {
        const auto& c = m.calendars[i];
        const double t = m.time_of(c.option_expiry);
        const double T = m.time_of(c.last_date());
        const double F0 = m.futures(T);
        const double A = a.integral(t, T);
        for (std::size_t j = 0; j < spec.moneyness.size(); ++j) {
            VolQuote q;
            q.expiry = t;
            q.contract = c.id;
            q.strike = F0 * std::exp(spec.moneyness[j] * 0.2 * std::sqrt(t));
            q.strike_or_delta = q.strike;
            q.strike_type = StrikeType::absolute;
            q.style = spec.mixed_styles && (i + j) % 2 == 1 ? MarginStyle::equity : MarginStyle::future;
            q.t_last = T;
            q.payment = m.time_of(c.payment_date());
            const double k = effective_strike(a, t, T, q.strike, F0);
            q.vol = black::implied_vol(std::exp(-A) * calls(t, k), t, q.strike / F0);
            m.quotes.rows.push_back(q);
        }
    }
    return m;
}

MarketData flat_market(double vol, const SyntheticSpec& spec) {
    MarketData m = synthetic_curves(spec.expiry_days, spec.lag_days, spec.futures);
    for (const auto& c : m.calendars) {
        const double t = m.time_of(c.option_expiry);
        const double T = m.time_of(c.last_date());
        const double F0 = m.futures(T);
        for (double x : spec.moneyness) {
            VolQuote q;
            q.expiry = t;
            q.contract = c.id;
            q.strike = F0 * std::exp(x * 0.2 * std::sqrt(t));
            q.strike_or_delta = q.strike;
            q.vol = vol;
            q.t_last = T;
            q.payment = m.time_of(c.payment_date());
            m.quotes.rows.push_back(q);
        }
    }
    return m;
}

void write_market(const MarketData& m, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream f(dir / "futures.csv");
        f << std::setprecision(17);
        f << "# valuation_date: " << format_iso_date(m.valuation_date) << "\n# day_count: ACT/365F\nT,price\n";
        for (const auto& p : m.futures.pillars()) f << p.t << "," << p.value << "\n";
    }
    {
        std::ofstream f(dir / "discount.csv");
        f << std::setprecision(17) << "T,df\n";
        for (const auto& p : m.discount.pillars()) {
            if (p.t > 0.0) f << p.t << "," << p.value << "\n";
        }
    }
    {
        std::ofstream f(dir / "calendars.csv");
        f << "id,first_trade,last_trade,first_notice,last_notice,first_delivery,last_delivery,option_expiry\n";
        for (const auto& c : m.calendars) {
            f << c.id << "," << format_iso_date(c.first_trade) << "," << format_iso_date(c.last_trade) << ","
              << format_iso_date(c.first_notice) << "," << format_iso_date(c.last_notice) << ","
              << format_iso_date(c.first_delivery) << "," << format_iso_date(c.last_delivery) << ","
              << format_iso_date(c.option_expiry) << "\n";
        }
    }
    {
        std::ofstream f(dir / "quotes.csv");
        f << std::setprecision(17) << "expiry,contract,strike_or_delta,strike_type,vol,style\n";
        for (const auto& q : m.quotes.rows) {
            f << q.expiry << "," << q.contract << "," << q.strike_or_delta << ","
              << (q.strike_type == StrikeType::delta ? "delta" : "strike") << "," << q.vol << "," << to_string(q.style) << "\n";
        }
    }
}

std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("futsmile_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

std::shared_ptr<const CalibratedSpotModel> flat_model(double a, double eta, std::vector<CurvePillar> futures,
                                                       std::vector<double> times, PdeGridSpec grid) {
    MarketData m;
    m.valuation_date = kValuation;
    m.futures = FuturesCurve(std::move(futures));
    m.discount = DiscountCurve({{10.0, std::exp(-0.3)}});
    std::sort(times.begin(), times.end());
    std::vector<LocalVolPillar> pillars;
    for (double t : times) pillars.push_back({t, {0.5, 1.0, 2.0}, {eta, eta, eta}});
    return std::make_shared<const CalibratedSpotModel>(m, MeanReversion(a), LocalVolSurface(pillars), grid);
}

std::vector<double> sample_spot(double a, double eta, double t, std::size_t n, std::uint64_t seed, double dt) {
    const auto steps = static_cast<std::size_t>(std::ceil(t / dt - 1e-9));
    const double h = t / static_cast<double>(steps);
    const double drift = -(a + 0.5 * eta * eta) * h;
    const double vol = eta * std::sqrt(h);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z;
    std::vector<double> out(n);
    for (std::size_t p = 0; p < n; ++p) {
        double logy = 0.0, inv_prev = 1.0, integral = 0.0;
        for (std::size_t i = 0; i < steps; ++i) {
            logy += drift + vol * z(rng);
            const double inv = std::exp(-logy);
            integral += 0.5 * h * (inv_prev + inv);
            inv_prev = inv;
        }
        out[p] = std::exp(logy) * (1.0 + a * integral);
    }
    return out;
}

Estimate estimate(const std::vector<double>& x) {
    double sum = 0.0, ss = 0.0;
    for (double v : x) {
        sum += v;
        ss += v * v;
    }
    const double n = static_cast<double>(x.size());
    const double mean = sum / n;
    return {mean, std::sqrt(std::max(ss / n - mean * mean, 0.0) / (n - 1.0))};
}

std::vector<CsoQuote> synthetic_cso_quotes(const MarketData& market, const SyntheticSpec& spec,
                                           const std::vector<double>& strike_offsets) {
    const MeanReversion a(spec.a);
    std::vector<double> times;
    for (const auto& c : market.calendars) times.push_back(market.time_of(c.option_expiry));
    const PdeGrid grid = PdeGrid::build(spec.reference_grid, times, 0.35, 3.0);
    const CallSurface calls = solve_dupire(FunctionLocalVol(spec.eta), a, grid);
    std::vector<CsoQuote> out;
    for (std::size_t i = 0; i + 1 < market.calendars.size(); ++i) {
        const auto& near = market.calendars[i];
        const auto& far = market.calendars[i + 1];
        const double te = market.time_of(near.option_expiry);
        const double T1 = market.time_of(near.last_date()), T2 = market.time_of(far.last_date());
        const double F1 = market.futures(T1), F2 = market.futures(T2);
        for (double x : strike_offsets) {
            CsoQuote q;
            q.expiry = te;
            q.near = near.id;
            q.far = far.id;
            q.strike = F1 - F2 + x * 0.01 * F1;
            const auto coef = cso_coefficients(a, F1, F2, te, T1, T2, q.strike);
            q.price = cso_from_calls(coef, [&](double k) { return calls(te, k); }, F1, F2, q.strike);
            out.push_back(q);
        }
    }
    return out;
}

void write_cso_quotes(const std::vector<CsoQuote>& quotes, const std::filesystem::path& path) {
    std::ofstream f(path);
    f << std::setprecision(17) << "expiry,near,far,strike,price\n";
    for (const auto& q : quotes) f << q.expiry << "," << q.near << "," << q.far << "," << q.strike << "," << q.price << "\n";
}

}  // namespace fstest
