// tmq: simulate, scan, fit, calibrate-readout and reproduce from the command line.
//
// Exit codes: 0 ok, 2 configuration error, 3 fit failure, 4 I/O error.

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>

#include "tmq/errors.hpp"
#include "tmq/experiment.hpp"

namespace {

struct Flags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<int> shots;
    std::string out;
    std::string model;
    std::string figure;
    std::string data;
};

tmq::RunConfig resolve(const Flags& f) {
    tmq::RunConfig c = f.config.empty() ? tmq::parse_config("") : tmq::load_config(f.config);
    if (f.seed) c.seed = *f.seed;
    if (f.shots) {
        if (*f.shots < 1) throw tmq::ConfigError("--shots: must be >= 1");
        c.shots = *f.shots;
    }
    if (!f.out.empty()) c.out = f.out;
    if (!f.model.empty()) {
        tmq::find_model(f.model);
        c.fit.model = f.model;
    }
    if (!f.figure.empty()) c.figure = f.figure;
    if (!f.data.empty()) c.fit.data = f.data;
    return c;
}

void emit(const tmq::RunConfig& c, const std::string& text) {
    if (c.out.empty())
        std::cout << text;
    else
        tmq::save_text(c.out, text);
}

int run_simulate(const Flags& f) {
    const auto c = resolve(f);
    tmq::SimulationSummary s;
    emit(c, tmq::cmd_simulate(c, &s));
    std::cerr << "simulate: " << c.schedule.name << ", " << s.points << " points x " << s.shots << " shots, " << s.rows
              << " rows\n";
    return 0;
}

int run_scan(const Flags& f) {
    const auto c = resolve(f);
    const tmq::Dataset d = tmq::cmd_scan(c);
    emit(c, tmq::write_dataset_csv(d));
    std::cerr << "scan: " << c.scan.variable << " over " << d.size() << " points, observable " << c.scan.observable
              << ", " << c.shots << " shots per point\n";
    return 0;
}

int run_fit(const Flags& f) {
    auto c = resolve(f);
    if (c.fit.data.empty()) throw tmq::ConfigError("fit.data: no dataset given");
    const tmq::Dataset d = tmq::load_dataset(c.fit.data);
    const auto rep = tmq::cmd_fit(c, d);
    std::cerr << rep.text;
    emit(c, rep.json);
    return 0;
}

int run_calibrate(const Flags& f) {
    auto c = resolve(f);
    if (c.fit.data.empty()) throw tmq::ConfigError("calibrate-readout: no probe-scan CSV given");
    const auto scan = tmq::probe_scan_from_rows(tmq::load_text(c.fit.data));
    const auto engine = tmq::make_engine(c);
    const auto cal = tmq::cmd_calibrate_readout(scan, engine.options().readout);
    emit(c, tmq::serialize_calibration(cal.calibration));
    std::cerr << "calibrate-readout: eps_43 = " << cal.calibration.eps_43 << " +/- " << cal.eps_sigma
              << ", dep_3 = " << cal.calibration.dep_3 << " +/- " << cal.dep_sigma << "\n";
    return 0;
}

int run_reproduce(const Flags& f) {
    const auto c = resolve(f);
    if (c.figure.empty()) throw tmq::ConfigError("--figure: required for reproduce");
    const auto tables = tmq::cmd_reproduce(c.figure, c);
    if (c.out.empty()) {
        for (const auto& t : tables) std::cout << t.csv() << "\n";
    } else {
        std::error_code ec;
        std::filesystem::create_directories(c.out, ec);
        if (ec) throw tmq::IoError("cannot create directory '" + c.out + "': " + ec.message());
        for (const auto& t : tables) tmq::save_text((std::filesystem::path(c.out) / (t.name + ".csv")).string(), t.csv());
    }
    std::cerr << "reproduce: " << c.figure << ", " << tables.size() << " tables, " << c.shots << " shots per point\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Thulium hyperfine-qubit simulator and analysis toolkit"};
    app.require_subcommand(1);
    Flags flags;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", flags.config, "INI configuration file");
        sub->add_option("--seed", flags.seed, "master seed");
        sub->add_option("--shots", flags.shots, "shots per point");
        sub->add_option("--out", flags.out, "output file (directory for reproduce)");
        sub->add_option("--model", flags.model, "model name for fit");
        sub->add_option("--figure", flags.figure, "figure id for reproduce");
    };
    auto* simulate = app.add_subcommand("simulate", "one CSV row per shot and measurement");
    auto* scan = app.add_subcommand("scan", "mean observable per scan point (x,y,sigma)");
    auto* fit = app.add_subcommand("fit", "fit a dataset with a model from the zoo");
    auto* calibrate = app.add_subcommand("calibrate-readout", "crosstalk calibration from a probe-duration scan");
    auto* reproduce = app.add_subcommand("reproduce", "simulated data and overlays for one figure");
    for (auto* sub : {simulate, scan, fit, calibrate, reproduce}) add_common(sub);
    fit->add_option("data", flags.data, "dataset CSV");
    calibrate->add_option("data", flags.data, "simulate output of a probe_scan run");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (simulate->parsed()) return run_simulate(flags);
        if (scan->parsed()) return run_scan(flags);
        if (fit->parsed()) return run_fit(flags);
        if (calibrate->parsed()) return run_calibrate(flags);
        if (reproduce->parsed()) return run_reproduce(flags);
    } catch (const tmq::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const tmq::FitError& e) {
        std::cerr << "fit error: " << e.what() << "\n";
        return 3;
    } catch (const tmq::IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
