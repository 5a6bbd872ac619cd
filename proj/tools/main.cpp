// futsmile command-line front end. Talks to the library only through the C API.
#include "futsmile/futsmile.h"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

// Exit codes. Library statuses map one to one; 64 is a command-line usage error.
constexpr int kUsage = 64;

struct Failure {
    int code;
    std::string message;
};

void check(fsm_status s, const std::string& context) {
    if (s != FSM_OK) throw Failure{static_cast<int>(s), context + ": " + fsm_last_error()};
}

std::string sha256_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Failure{FSM_ERR_IO, "cannot read " + path.string()};
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
    std::vector<char> buf(1 << 16);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), md, &len);
    std::ostringstream hex;
    for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
    return hex.str();
}

class Manifest {
public:
    explicit Manifest(std::string command) { doc_["tool"] = "futsmile"; doc_["version"] = fsm_version(); doc_["command"] = std::move(command); }

    void input(const fs::path& path) {
        if (fs::is_directory(path)) {
            std::vector<fs::path> files;
            for (const auto& e : fs::directory_iterator(path)) {
                if (e.is_regular_file()) files.push_back(e.path());
            }
            std::sort(files.begin(), files.end());
            for (const auto& f : files) input(f);
            return;
        }
        doc_["inputs"].push_back({{"path", path.generic_string()}, {"sha256", sha256_file(path)}});
    }
    void output(const std::string& path) { doc_["outputs"].push_back(path); }
    void config(const CLI::App& app) {
        ordered_json cfg = ordered_json::object();
        for (const CLI::Option* opt : app.get_options()) {
            const std::string key = opt->get_single_name();
            if (key.empty() || key == "help" || key == "config" || key == "manifest") continue;
            if (opt->get_expected_max() == 0) {
                cfg[key] = opt->count() > 0 && opt->as<bool>();
            } else if (opt->count() > 0) {
                const auto& r = opt->results();
                if (opt->get_expected_max() > 1) {
                    cfg[key] = r;
                } else {
                    cfg[key] = r.back();
                }
            } else {
                cfg[key] = opt->get_default_str();
            }
        }
        doc_["config"] = std::move(cfg);
    }
    void resolved(ordered_json values) { doc_["resolved"] = std::move(values); }
    ordered_json& results() { return doc_["results"]; }
    void status(int code) { doc_["exit_code"] = code; }

    void write(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw Failure{FSM_ERR_IO, "cannot write manifest " + path};
        out << doc_.dump(2) << "\n";
    }

private:
    ordered_json doc_;
};

void ensure_parent(const std::string& path) {
    if (path.empty()) return;
    const fs::path parent = fs::path(path).parent_path();
    std::error_code ec;
    if (!parent.empty()) fs::create_directories(parent, ec);
}

std::string full(double x) {
    std::ostringstream s;
    s << std::setprecision(17) << x;
    return s.str();
}

struct CalibrationFlags {
    fsm_calibration_options opts{};
    std::string time_interpolation = "total_variance";
    bool level_only = false;
    bool allow_nonmonotone_discount = false;
    std::vector<double> a{0.0};
    std::vector<double> a_breakpoints;

    CalibrationFlags() { fsm_calibration_options_default(&opts); }

    void add(CLI::App* app, bool with_a) {
        if (with_a) {
            app->add_option("--a", a, "Mean-reversion speed: one value, or one per breakpoint interval")->capture_default_str();
            app->add_option("--a-breakpoints", a_breakpoints, "Interior breakpoints (years) of a piecewise-constant speed");
        }
        app->add_option("--max-iter", opts.max_iterations, "Maximum calibration iterations")->capture_default_str();
        app->add_option("--tolerance-bp", opts.tolerance_bp, "Stop once the max quote error falls below this (bp)")->capture_default_str();
        app->add_option("--threshold-bp", opts.threshold_bp, "Max quote error (bp) counted as converged")->capture_default_str();
        app->add_option("--aa-memory", opts.aa_memory, "Anderson memory; 0 is plain fixed-point iteration")->capture_default_str();
        app->add_option("--aa-ridge", opts.aa_ridge, "Relative ridge of the Anderson least squares")->capture_default_str();
        app->add_flag("--level-only", level_only, "Update node levels only, skip the skew correction");
        app->add_option("--time-interpolation", time_interpolation, "total_variance or local_variance")
            ->check(CLI::IsMember({"total_variance", "local_variance"}))
            ->capture_default_str();
        app->add_option("--eta-min", opts.eta_min, "Local-vol floor")->capture_default_str();
        app->add_option("--eta-max", opts.eta_max, "Local-vol cap")->capture_default_str();
        app->add_option("--strike-intervals", opts.strike_intervals, "PDE strike intervals")->capture_default_str();
        app->add_option("--dt-max", opts.dt_max, "Largest PDE time step (years)")->capture_default_str();
        app->add_option("--k-max", opts.k_max, "Upper strike boundary; 0 picks it from the vol level")->capture_default_str();
        app->add_flag("--allow-nonmonotone-discount", allow_nonmonotone_discount, "Accept discount factors that increase with maturity");
    }

    const fsm_calibration_options* resolved() {
        opts.level_only = level_only ? 1 : 0;
        opts.time_interpolation = time_interpolation == "local_variance" ? 1 : 0;
        return &opts;
    }

    ordered_json to_json() const {
        return {{"a", a},
                {"a_breakpoints", a_breakpoints},
                {"max_iterations", opts.max_iterations},
                {"tolerance_bp", opts.tolerance_bp},
                {"threshold_bp", opts.threshold_bp},
                {"aa_memory", opts.aa_memory},
                {"aa_ridge", opts.aa_ridge},
                {"level_only", level_only},
                {"time_interpolation", time_interpolation},
                {"eta_min", opts.eta_min},
                {"eta_max", opts.eta_max},
                {"strike_intervals", opts.strike_intervals},
                {"dt_max", opts.dt_max},
                {"k_max", opts.k_max},
                {"concentration", opts.concentration},
                {"rannacher_steps", opts.rannacher_steps},
                {"enforce_monotone_discount", !allow_nonmonotone_discount}};
    }
};

template <class T, void (*Free)(T*)>
struct Handle {
    T* p = nullptr;
    ~Handle() { Free(p); }
};

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) {
        cell.erase(0, cell.find_first_not_of(" \t\r"));
        cell.erase(cell.find_last_not_of(" \t\r") + 1);
        out.push_back(cell);
    }
    return out;
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

int run_calibrate(CalibrationFlags& cf, const std::string& market_dir, const std::string& out, const std::string& report,
                  const std::string& surface, Manifest& manifest) {
    manifest.input(market_dir);
    Handle<fsm_market, fsm_market_free> market;
    check(fsm_market_load(market_dir.c_str(), cf.allow_nonmonotone_discount ? 0 : 1, &market.p), "loading market");

    Handle<fsm_model, fsm_model_free> model;
    Handle<fsm_report, fsm_report_free> rep;
    const fsm_status s = fsm_calibrate(market.p, cf.a_breakpoints.data(), cf.a_breakpoints.size(), cf.a.data(), cf.a.size(),
                                       cf.resolved(), &model.p, &rep.p);
    if (s != FSM_OK && s != FSM_ERR_NOT_CONVERGED) check(s, "calibrating");
    const std::string message = s == FSM_OK ? "" : fsm_last_error();

    check(fsm_model_save(model.p, out.c_str()), "writing model");
    manifest.output(out);
    check(fsm_report_write_csv(rep.p, report.c_str()), "writing report");
    manifest.output(report);
    if (!surface.empty()) {
        check(fsm_model_dump_surface(model.p, surface.c_str()), "writing surface");
        manifest.output(surface);
    }
    auto& r = manifest.results();
    r["converged"] = fsm_report_converged(rep.p) == 1;
    r["iterations"] = fsm_report_iterations(rep.p);
    r["final_max_bp"] = fsm_report_final_max_bp(rep.p);
    r["wing_atm_pillars"] = fsm_report_wing_atm_pillars(rep.p);

    std::cout << "iterations=" << fsm_report_iterations(rep.p) << " max_error_bp=" << full(fsm_report_final_max_bp(rep.p))
              << " converged=" << (fsm_report_converged(rep.p) ? "yes" : "no") << "\n";
    if (s == FSM_ERR_NOT_CONVERGED) {
        std::cerr << "futsmile: " << message << "\n";
        return FSM_ERR_NOT_CONVERGED;
    }
    return 0;
}

int run_price(const std::string& model_path, const std::string& trades, const std::string& out, Manifest& manifest) {
    manifest.input(model_path);
    manifest.input(trades);
    Handle<fsm_model, fsm_model_free> model;
    check(fsm_model_load(model_path.c_str(), &model.p), "loading model");

    std::ifstream in(trades);
    if (!in) throw Failure{FSM_ERR_IO, "cannot read " + trades};
    std::string line;
    if (!std::getline(in, line)) throw Failure{FSM_ERR_INVALID, trades + ": empty file"};
    const auto header = split(line);
    auto column = [&](const std::string& name) -> std::size_t {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw Failure{FSM_ERR_INVALID, trades + ": missing column " + name};
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t c_type = column("trade_type"), c_exp = column("expiry"), c_con = column("contract"),
                      c_k = column("strike"), c_style = column("style");

    std::ostringstream body;
    body << std::setprecision(17) << "trade_type,expiry,contract,strike,style,price,implied_vol\n";
    int row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto f = split(line);
        if (f.size() < header.size()) throw Failure{FSM_ERR_INVALID, trades + ": row " + std::to_string(row) + " is short"};
        const std::string where = trades + " row " + std::to_string(row);
        const std::string type = lower(f[c_type]);
        const std::string style = lower(f[c_style]);
        double t = 0.0;
        check(fsm_model_time(model.p, f[c_exp].c_str(), &t), where);
        double strike = 0.0;
        try {
            std::size_t used = 0;
            strike = std::stod(f[c_k], &used);
            if (used != f[c_k].size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw Failure{FSM_ERR_INVALID, where + ": bad strike '" + f[c_k] + "'"};
        }
        int style_code = 0;
        if (style == "future" || style == "futures") {
            style_code = 0;
        } else if (style == "equity") {
            style_code = 1;
        } else {
            throw Failure{FSM_ERR_SCHEMA, where + ": unsupported style '" + f[c_style] + "'"};
        }
        double price = 0.0, vol = 0.0;
        if (type == "call" || type == "put") {
            check(fsm_price_vanilla(model.p, t, f[c_con].c_str(), strike, style_code, type == "put", &price, &vol), where);
        } else if (type == "cso") {
            const auto slash = f[c_con].find('/');
            if (slash == std::string::npos) throw Failure{FSM_ERR_INVALID, where + ": CSO contract must be NEAR/FAR"};
            if (style_code != 0) throw Failure{FSM_ERR_SCHEMA, where + ": CSOs are priced future-style only"};
            const std::string near = f[c_con].substr(0, slash), far = f[c_con].substr(slash + 1);
            check(fsm_price_cso(model.p, t, near.c_str(), far.c_str(), strike, &price, &vol), where);
        } else {
            throw Failure{FSM_ERR_SCHEMA, where + ": unsupported trade type '" + f[c_type] + "'"};
        }
        body << type << "," << f[c_exp] << "," << f[c_con] << "," << f[c_k] << "," << style << "," << price << ",";
        if (vol == vol) body << vol;
        body << "\n";
    }
    std::ofstream o(out, std::ios::binary);
    if (!o) throw Failure{FSM_ERR_IO, "cannot write " + out};
    o << body.str();
    manifest.output(out);
    manifest.results()["trades"] = row - 1;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Futures smile calibration, pricing and simulation", "futsmile"};
    app.set_config("--config", "", "TOML config file; command-line flags take precedence");
    app.set_version_flag("--version", std::string(fsm_version()));
    app.require_subcommand(1);
    std::string manifest_path;
    app.add_option("--manifest", manifest_path, "Where to write the run manifest (default: next to the main output)");

    // calibrate
    CalibrationFlags cal;
    std::string market_dir, model_out, report_out, surface_out;
    auto* c = app.add_subcommand("calibrate", "Calibrate the local-vol surface to vanilla quotes");
    c->add_option("--market", market_dir, "Directory holding futures.csv, discount.csv, quotes.csv, calendars.csv")->required();
    c->add_option("--out", model_out, "Model JSON to write")->required();
    c->add_option("--report", report_out, "Convergence CSV (default: report.csv beside --out)");
    c->add_option("--dump-surface", surface_out, "Also write the normalized call surface and density");
    cal.add(c, true);

    // price
    std::string model_in, trades, prices_out;
    auto* p = app.add_subcommand("price", "Price vanilla and calendar-spread trades off a saved model");
    p->add_option("--model", model_in, "Model JSON")->required();
    p->add_option("--trades", trades, "Trades CSV: trade_type,expiry,contract,strike,style")->required();
    p->add_option("--out", prices_out, "Prices CSV to write")->required();

    // fit-a
    CalibrationFlags fit_cal;
    fsm_fit_options fit_opts{};
    fsm_fit_options_default(&fit_opts);
    bool no_refine = false;
    std::string fit_market, cso_quotes, drops_out, trials_out;
    auto* f = app.add_subcommand("fit-a", "Fit the mean-reversion speed to calendar-spread option quotes");
    f->add_option("--market", fit_market, "Market directory")->required();
    f->add_option("--cso-quotes", cso_quotes, "CSV: expiry,near,far,strike,price")->required();
    f->add_option("--out", drops_out, "Volatility-drop CSV to write")->required();
    f->add_option("--trials", trials_out, "Per-trial CSV (default: trials.csv beside --out)");
    f->add_option("--lower", fit_opts.lower, "Smallest speed tried")->capture_default_str();
    f->add_option("--upper", fit_opts.upper, "Largest speed tried")->capture_default_str();
    f->add_option("--step", fit_opts.step, "Grid spacing")->capture_default_str();
    f->add_flag("--no-refine", no_refine, "Stop at the best grid point");
    fit_cal.add(f, false);

    // simulate
    fsm_simulation_options sim{};
    fsm_simulation_options_default(&sim);
    std::vector<double> rho_t, rho_v;
    std::string sim_model, terminal_out, diag_out;
    std::size_t paths = sim.n_paths;
    std::uint64_t seed = sim.seed;
    auto* s = app.add_subcommand("simulate", "Simulate the stochastic local-vol model on a saved model");
    s->add_option("--model", sim_model, "Model JSON")->required();
    s->add_option("--out", terminal_out, "Terminal distribution CSV")->required();
    s->add_option("--diagnostics", diag_out, "Diagnostics CSV (default: diagnostics.csv beside --out)");
    s->add_option("--xi", sim.xi, "Vol-of-vol")->check(CLI::NonNegativeNumber)->capture_default_str();
    s->add_option("--rho-v", sim.rho_v, "Spot-vol correlation, |rho_v| <= 1/sqrt(2)")->capture_default_str();
    s->add_option("--rho", sim.rho, "Constant factor loading")->check(CLI::Range(-1.0, 1.0))->capture_default_str();
    s->add_option("--rho-maturities", rho_t, "Maturities of a term structure of loadings");
    s->add_option("--rho-values", rho_v, "Loadings at --rho-maturities");
    s->add_option("--paths", paths, "Number of paths")->check(CLI::PositiveNumber)->capture_default_str();
    s->add_option("--seed", seed, "RNG seed")->capture_default_str();
    s->add_option("--dt", sim.dt, "Time step (years)")->check(CLI::PositiveNumber)->capture_default_str();

    // implied-vol
    double premium = 0.0, t_iv = 0.0, fwd = 0.0, k_iv = 0.0, df = 1.0;
    bool put = false;
    auto* iv = app.add_subcommand("implied-vol", "Black implied volatility of a futures option premium");
    iv->add_option("--premium", premium, "Option premium")->required();
    iv->add_option("--t", t_iv, "Expiry (years)")->required();
    iv->add_option("--forward", fwd, "Futures price")->required();
    iv->add_option("--strike", k_iv, "Strike")->required();
    iv->add_option("--discount", df, "Discount factor applied to the premium")->capture_default_str();
    iv->add_flag("--put", put, "Premium is a put");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kUsage;
    }

    CLI::App* cmd = app.get_subcommands().front();
    auto beside = [](const std::string& main, const char* name) { return (fs::path(main).parent_path() / name).string(); };
    if (report_out.empty()) report_out = beside(model_out, "report.csv");
    if (trials_out.empty()) trials_out = beside(drops_out, "trials.csv");
    if (diag_out.empty()) diag_out = beside(terminal_out, "diagnostics.csv");
    fit_opts.refine = no_refine ? 0 : 1;
    sim.n_paths = paths;
    sim.seed = seed;

    Manifest manifest(cmd->get_name());
    manifest.config(*cmd);
    if (cmd == c) manifest.resolved(cal.to_json());
    if (cmd == f) {
        auto r = fit_cal.to_json();
        r["lower"] = fit_opts.lower;
        r["upper"] = fit_opts.upper;
        r["step"] = fit_opts.step;
        r["refine"] = fit_opts.refine == 1;
        manifest.resolved(r);
    }
    if (cmd == s) {
        manifest.resolved({{"xi", sim.xi}, {"rho_v", sim.rho_v}, {"rho", sim.rho}, {"rho_maturities", rho_t},
                           {"rho_values", rho_v}, {"paths", sim.n_paths}, {"seed", sim.seed}, {"dt", sim.dt}});
    }
    std::string primary;
    int rc = 0;
    for (const std::string* out : {&model_out, &report_out, &surface_out, &prices_out, &drops_out, &trials_out, &terminal_out,
                                   &diag_out, &manifest_path}) {
        ensure_parent(*out);
    }
    try {
        if (cmd == c) {
            primary = model_out;
            rc = run_calibrate(cal, market_dir, model_out, report_out, surface_out, manifest);
        } else if (cmd == p) {
            primary = prices_out;
            rc = run_price(model_in, trades, prices_out, manifest);
        } else if (cmd == f) {
            primary = drops_out;
            manifest.input(fit_market);
            manifest.input(cso_quotes);
            Handle<fsm_market, fsm_market_free> market;
            check(fsm_market_load(fit_market.c_str(), fit_cal.allow_nonmonotone_discount ? 0 : 1, &market.p), "loading market");
            Handle<fsm_fit, fsm_fit_free> fit;
            check(fsm_fit_mean_reversion(market.p, cso_quotes.c_str(), &fit_opts, fit_cal.resolved(), &fit.p), "fitting");
            check(fsm_fit_write_curves(fit.p, drops_out.c_str()), "writing drops");
            manifest.output(drops_out);
            check(fsm_fit_write_trials(fit.p, trials_out.c_str()), "writing trials");
            manifest.output(trials_out);
            manifest.results()["a"] = fsm_fit_value(fit.p);
            manifest.results()["objective"] = fsm_fit_objective(fit.p);
            std::cout << "a=" << full(fsm_fit_value(fit.p)) << " objective=" << full(fsm_fit_objective(fit.p)) << "\n";
        } else if (cmd == s) {
            primary = terminal_out;
            if (rho_t.size() != rho_v.size()) throw Failure{FSM_ERR_INVALID, "--rho-maturities and --rho-values differ in length"};
            manifest.input(sim_model);
            Handle<fsm_model, fsm_model_free> model;
            check(fsm_model_load(sim_model.c_str(), &model.p), "loading model");
            sim.rho_maturities = rho_t.empty() ? nullptr : rho_t.data();
            sim.rho_values = rho_v.empty() ? nullptr : rho_v.data();
            sim.n_rho = rho_t.size();
            Handle<fsm_simulation, fsm_simulation_free> run;
            check(fsm_simulate(model.p, &sim, &run.p), "simulating");
            check(fsm_simulation_write_terminal(run.p, terminal_out.c_str()), "writing terminal distribution");
            manifest.output(terminal_out);
            check(fsm_simulation_write_diagnostics(run.p, diag_out.c_str()), "writing diagnostics");
            manifest.output(diag_out);
            manifest.results()["max_gyongy_excess_bp"] = fsm_simulation_max_gyongy_excess(run.p);
        } else if (cmd == iv) {
            double vol = 0.0;
            check(fsm_implied_vol(premium, t_iv, fwd, k_iv, put ? 1 : 0, df, &vol), "implied vol");
            manifest.results()["implied_vol"] = vol;
            std::cout << full(vol) << "\n";
        }
    } catch (const Failure& e) {
        std::cerr << "futsmile: " << e.message << "\n";
        rc = e.code;
    }

    manifest.status(rc);
    if (manifest_path.empty() && !primary.empty()) manifest_path = primary + ".manifest.json";
    if (!manifest_path.empty()) {
        try {
            manifest.write(manifest_path);
        } catch (const Failure& e) {
            std::cerr << "futsmile: " << e.message << "\n";
            if (rc == 0) rc = e.code;
        }
    }
    return rc;
}
