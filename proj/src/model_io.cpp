#include "futsmile/model_io.hpp"

#include "futsmile/error.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <sstream>

namespace futsmile {

namespace {

using nlohmann::json;

json pillars_json(std::span<const CurvePillar> pillars) {
    json out = json::array();
    for (const auto& p : pillars) out.push_back({p.t, p.value});
    return out;
}

std::vector<CurvePillar> pillars_from(const json& j) {
    std::vector<CurvePillar> out;
    for (const auto& p : j) out.push_back(CurvePillar{p.at(0).get<double>(), p.at(1).get<double>()});
    return out;
}

json calendar_json(const ContractCalendar& c) {
    json j = {{"id", c.id},
              {"first_trade", format_iso_date(c.first_trade)},
              {"last_trade", format_iso_date(c.last_trade)},
              {"first_notice", format_iso_date(c.first_notice)},
              {"last_notice", format_iso_date(c.last_notice)},
              {"first_delivery", format_iso_date(c.first_delivery)},
              {"last_delivery", format_iso_date(c.last_delivery)},
              {"option_expiry", format_iso_date(c.option_expiry)}};
    if (c.option_payment) j["option_payment"] = format_iso_date(*c.option_payment);
    return j;
}

ContractCalendar calendar_from(const json& j) {
    ContractCalendar c;
    c.id = j.at("id").get<std::string>();
    c.first_trade = parse_iso_date(j.at("first_trade").get<std::string>());
    c.last_trade = parse_iso_date(j.at("last_trade").get<std::string>());
    c.first_notice = parse_iso_date(j.at("first_notice").get<std::string>());
    c.last_notice = parse_iso_date(j.at("last_notice").get<std::string>());
    c.first_delivery = parse_iso_date(j.at("first_delivery").get<std::string>());
    c.last_delivery = parse_iso_date(j.at("last_delivery").get<std::string>());
    c.option_expiry = parse_iso_date(j.at("option_expiry").get<std::string>());
    if (j.contains("option_payment")) c.option_payment = parse_iso_date(j.at("option_payment").get<std::string>());
    c.validate();
    return c;
}

json quote_json(const VolQuote& q) {
    return {{"expiry", q.expiry},
            {"contract", q.contract},
            {"strike_or_delta", q.strike_or_delta},
            {"strike_type", q.strike_type == StrikeType::delta ? "delta" : "strike"},
            {"vol", q.vol},
            {"style", std::string(to_string(q.style))},
            {"strike", q.strike},
            {"t_last", q.t_last},
            {"payment", q.payment}};
}

VolQuote quote_from(const json& j) {
    VolQuote q;
    q.expiry = j.at("expiry").get<double>();
    q.contract = j.at("contract").get<std::string>();
    q.strike_or_delta = j.at("strike_or_delta").get<double>();
    q.strike_type = j.at("strike_type").get<std::string>() == "delta" ? StrikeType::delta : StrikeType::absolute;
    q.vol = j.at("vol").get<double>();
    q.style = parse_margin_style(j.at("style").get<std::string>());
    q.strike = j.at("strike").get<double>();
    q.t_last = j.at("t_last").get<double>();
    q.payment = j.at("payment").get<double>();
    return q;
}

json grid_json(const PdeGridSpec& g) {
    return {{"strike_intervals", g.strike_intervals}, {"k_max", g.k_max},         {"width", g.width},
            {"concentration", g.concentration},       {"dt_max", g.dt_max},       {"rannacher_steps", g.rannacher_steps},
            {"theta", g.theta},                       {"peclet_limit", g.peclet_limit},
            {"convexity_tolerance", g.convexity_tolerance}};
}

PdeGridSpec grid_from(const json& j) {
    PdeGridSpec g;
    g.strike_intervals = j.at("strike_intervals").get<int>();
    g.k_max = j.at("k_max").get<double>();
    g.width = j.at("width").get<double>();
    g.concentration = j.at("concentration").get<double>();
    g.dt_max = j.at("dt_max").get<double>();
    g.rannacher_steps = j.at("rannacher_steps").get<int>();
    g.theta = j.at("theta").get<double>();
    g.peclet_limit = j.at("peclet_limit").get<double>();
    g.convexity_tolerance = j.at("convexity_tolerance").get<double>();
    return g;
}

}  // namespace

std::string model_to_json(const CalibratedSpotModel& model) {
    const auto& m = model.market();
    json calendars = json::array();
    for (const auto& c : m.calendars) calendars.push_back(calendar_json(c));
    json quotes = json::array();
    for (const auto& q : m.quotes.rows) quotes.push_back(quote_json(q));
    json pillars = json::array();
    for (const auto& p : model.local_vol().pillars()) pillars.push_back({{"t", p.t}, {"k", p.k}, {"eta", p.eta}});
    const auto& a = model.mean_reversion();
    json doc = {
        {"schema", "futsmile-model"},
        {"version", kModelSchemaVersion},
        {"valuation_date", format_iso_date(m.valuation_date)},
        {"day_count", kDayCount},
        {"futures", pillars_json(m.futures.pillars())},
        {"discount", {{"rate_id", m.discount.rate_id()}, {"pillars", pillars_json(m.discount.pillars())}}},
        {"contracts", calendars},
        {"quotes", quotes},
        {"mean_reversion",
         {{"breakpoints", std::vector<double>(a.breakpoints().begin(), a.breakpoints().end())},
          {"values", std::vector<double>(a.values().begin(), a.values().end())}}},
        {"local_vol",
         {{"time_interpolation", std::string(to_string(model.local_vol().time_interpolation()))},
          {"bounds", {{"min", model.local_vol().bounds().min}, {"max", model.local_vol().bounds().max}}},
          {"pillars", pillars}}},
        {"pde_grid", grid_json(model.grid_spec())},
    };
    return doc.dump(2) + "\n";
}

CalibratedSpotModel model_from_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        fail(ErrorCode::parse, std::string("model JSON: ") + e.what());
    }
    try {
        if (doc.value("schema", "") != "futsmile-model") fail(ErrorCode::schema, "not a model document");
        const int version = doc.at("version").get<int>();
        if (version != kModelSchemaVersion)
            fail(ErrorCode::schema, "unsupported model schema version " + std::to_string(version));
        if (doc.at("day_count").get<std::string>() != kDayCount) fail(ErrorCode::schema, "unsupported day count");
        MarketData m;
        m.valuation_date = parse_iso_date(doc.at("valuation_date").get<std::string>());
        m.futures = FuturesCurve(pillars_from(doc.at("futures")));
        const auto& disc = doc.at("discount");
        m.discount = DiscountCurve(pillars_from(disc.at("pillars")), false, disc.at("rate_id").get<std::string>());
        for (const auto& c : doc.at("contracts")) m.calendars.push_back(calendar_from(c));
        for (const auto& q : doc.at("quotes")) m.quotes.rows.push_back(quote_from(q));
        const auto& mr = doc.at("mean_reversion");
        MeanReversion a(mr.at("breakpoints").get<std::vector<double>>(), mr.at("values").get<std::vector<double>>());
        const auto& lv = doc.at("local_vol");
        std::vector<LocalVolPillar> pillars;
        for (const auto& p : lv.at("pillars"))
            pillars.push_back(LocalVolPillar{p.at("t").get<double>(), p.at("k").get<std::vector<double>>(), p.at("eta").get<std::vector<double>>()});
        LocalVolBounds bounds{lv.at("bounds").at("min").get<double>(), lv.at("bounds").at("max").get<double>()};
        LocalVolSurface eta(std::move(pillars), parse_time_interpolation(lv.at("time_interpolation").get<std::string>()), bounds);
        return CalibratedSpotModel(std::move(m), std::move(a), std::move(eta), grid_from(doc.at("pde_grid")));
    } catch (const json::exception& e) {
        fail(ErrorCode::schema, std::string("model JSON: ") + e.what());
    }
}

void save_model(const CalibratedSpotModel& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::io, "cannot write " + path.string());
    out << model_to_json(model);
    if (!out) fail(ErrorCode::io, "failed writing " + path.string());
}

CalibratedSpotModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::io, "cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return model_from_json(buf.str());
}

}  // namespace futsmile
