// qmeas: run measurement scenarios and write their reports.

#include "qmeas/scenario.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
namespace sc = qmeas::scenario;

namespace {

enum Exit : int { kOk = 0, kCheckFailed = 1, kConfig = 2, kPhysicality = 3, kBoundary = 4 };

std::vector<std::string> expand(const std::vector<std::string>& inputs) {
    std::vector<std::string> files;
    for (const auto& in : inputs) {
        if (fs::is_directory(in)) {
            for (const auto& e : fs::directory_iterator(in)) {
                if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path().string());
            }
        } else {
            files.push_back(in);
        }
    }
    std::sort(files.begin(), files.end());
    return files;
}

struct Outcome {
    std::string path;
    std::optional<sc::Report> report;
    int code = kOk;
    std::string error;
};

Outcome run_one(const std::string& path, const std::optional<std::uint64_t>& seed,
                const std::vector<std::string>& tol_overrides) {
    Outcome o{path, std::nullopt, kOk, {}};
    try {
        sc::Scenario s = sc::load_scenario(path, seed.has_value());
        if (seed) s.seed = *seed;
        for (const auto& t : tol_overrides) sc::override_tolerance(s.tol, t);
        o.report = sc::run(s);
        o.code = o.report->pass() ? kOk : kCheckFailed;
    } catch (const sc::ConfigError& e) {
        o.code = kConfig;
        o.error = std::string("configuration error: ") + e.what();
    } catch (const qmeas::PhysicalityError& e) {
        o.code = kPhysicality;
        o.error = std::string("unphysical state: ") + e.what();
    } catch (const qmeas::grid::BoundaryMassError& e) {
        o.code = kBoundary;
        o.error = std::string("grid boundary: ") + e.what();
    } catch (const std::exception& e) {
        o.code = kConfig;
        o.error = std::string("error: ") + e.what();
    }
    return o;
}

void write_file(const fs::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << content;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Noise/disturbance scenarios for indirect position measurements"};
    app.require_subcommand(1);

    std::vector<std::string> inputs;
    std::string out_dir;
    std::string format = "text";
    std::optional<std::uint64_t> seed;
    std::vector<std::string> tol_overrides;
    unsigned jobs = 1;
    bool verbose = false;

    auto* run = app.add_subcommand("run", "Run scenario files or directories of them");
    run->add_option("inputs", inputs, "Scenario JSON files or directories")->required();
    run->add_option("-o,--output", out_dir, "Directory for report files");
    run->add_option("-f,--format", format, "Report format on stdout and disk")
        ->check(CLI::IsMember({"json", "text", "both"}));
    run->add_option("--seed", seed, "Override every scenario's seed");
    run->add_option("--tol", tol_overrides, "Tolerance override key=value (repeatable)");
    run->add_option("-j,--jobs", jobs, "Scenarios run concurrently")->check(CLI::PositiveNumber);
    run->add_flag("-v,--verbose", verbose, "Print full reports even when writing to a directory");

    auto* list = app.add_subcommand("list", "List the available checks");

    CLI11_PARSE(app, argc, argv);

    if (list->parsed()) {
        for (const auto& c : sc::known_checks()) std::cout << c << "\n";
        return kOk;
    }

    const std::vector<std::string> files = expand(inputs);
    if (files.empty()) {
        std::cerr << "qmeas: no scenario files found\n";
        return kConfig;
    }

    std::vector<Outcome> outcomes(files.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < files.size(); i = next++) outcomes[i] = run_one(files[i], seed, tol_overrides);
    };
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < std::min<std::size_t>(jobs, files.size()); ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    std::sort(outcomes.begin(), outcomes.end(), [](const Outcome& a, const Outcome& b) {
        const std::string ka = a.report ? a.report->scenario : a.path;
        const std::string kb = b.report ? b.report->scenario : b.path;
        return ka < kb;
    });

    if (!out_dir.empty()) fs::create_directories(out_dir);
    const bool want_json = format != "text";
    const bool want_text = format != "json";
    int code = kOk;
    for (const auto& o : outcomes) {
        code = std::max(code, o.code);
        if (!o.report) {
            std::cerr << o.path << ": " << o.error << "\n";
            continue;
        }
        const sc::Report& r = *o.report;
        const std::string json = sc::to_json(r).dump(2) + "\n";
        const std::string text = sc::to_text(r);
        if (!out_dir.empty()) {
            const fs::path base = fs::path(out_dir) / r.scenario;
            if (want_json) write_file(base.string() + ".json", json);
            if (want_text) write_file(base.string() + ".txt", text);
            for (const auto& t : r.tables) write_file(base.string() + "-" + t.name + ".csv", sc::to_csv(t));
            if (verbose) std::cout << (want_text ? text : json);
            else std::cout << r.scenario << ": " << (r.pass() ? "PASS" : "FAIL") << "\n";
        } else {
            if (want_text) std::cout << text;
            if (want_json) std::cout << json;
        }
        if (!r.pass()) {
            for (const auto& q : r.quantities) {
                if (!q.pass) std::cerr << r.scenario << ": " << q.check << "/" << q.name << " failed (" << q.criterion << ")\n";
            }
        }
    }
    return code;
}
