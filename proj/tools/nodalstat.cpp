#include "nodal/experiment.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

using namespace nodal;

namespace {

struct Common {
    std::string config;
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<int> jobs;
};

nlohmann::json load_json(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw Error("cannot open config " + path);
    nlohmann::json j = nlohmann::json::parse(is, nullptr, false, true);
    if (j.is_discarded()) throw InvalidSpec("config " + path + " is not valid JSON");
    return j;
}

ExperimentConfig build_config(const std::string& kind, const Common& c) {
    nlohmann::json j = c.config.empty() ? nlohmann::json::object() : load_json(c.config);
    for (const auto& s : c.sets) apply_override(j, s);
    if (j.contains("kind") && j["kind"] != kind)
        throw InvalidSpec("config kind '" + j["kind"].get<std::string>() + "' does not match subcommand '" + kind + "'");
    j["kind"] = kind;
    if (c.seed) j["seed"] = *c.seed;
    if (c.out) j["out"] = *c.out;
    if (c.jobs) j["jobs"] = *c.jobs;
    return ExperimentConfig::from_json(j);
}

void print_summary(const nlohmann::json& s, std::ostream& os) {
    os << s["kind"].get<std::string>() << " run " << s["config_hash"].get<std::string>()
       << (s["complete"].get<bool>() ? "" : " (incomplete)") << ": " << s["rows"] << " rows, "
       << s["skipped"].size() << " skipped\n";
    for (const auto& [deg, cols] : s["stats"].items()) {
        os << "  degree " << deg << ":";
        for (const auto& [name, st] : cols.items())
            os << " " << name << "=" << st["mean"].get<double>() << " (var " << st["variance"].get<double>() << ")";
        os << "\n";
    }
    if (!s["derived"].empty()) os << "  derived: " << s["derived"].dump() << "\n";
    if (s.contains("scaling")) {
        const auto& r = s["scaling"];
        os << "  log Var[N] vs log n slope " << r["slope"].get<double>() << " +- " << r["slope_se"].get<double>()
           << ", 95% CI [" << r["ci95"][0].get<double>() << ", " << r["ci95"][1].get<double>() << "]: "
           << r["verdict"].get<std::string>() << "; reference slope 2, distance "
           << r["distance_from_reference"].get<double>() << "\n";
    }
    if (s.contains("scaling_error")) os << "  scaling: " << s["scaling_error"].get<std::string>() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Nodal-domain statistics of random spherical harmonics"};
    app.require_subcommand(1);

    const std::vector<std::string> kinds = {"sample", "census", "critical", "caricature", "loopmodel", "lemmas",
                                            "variance-scan"};
    std::map<std::string, Common> opts;
    std::map<std::string, long> stop_after;
    for (const auto& k : kinds) {
        CLI::App* sub = app.add_subcommand(k, "run a " + k + " experiment");
        Common& c = opts[k];
        sub->add_option("--config", c.config, "JSON config file")->check(CLI::ExistingFile);
        sub->add_option("--set", c.sets, "override key=value (repeatable)");
        sub->add_option("--seed", c.seed, "base seed");
        sub->add_option("--out", c.out, "run directory");
        sub->add_option("--jobs", c.jobs, "worker threads")->check(CLI::PositiveNumber);
        stop_after[k] = -1;
        sub->add_option("--stop-after", stop_after[k], "stop after this many new samples (resume later)");
    }
    std::string report_dir;
    CLI::App* report = app.add_subcommand("report", "print the summary of a run directory");
    report->add_option("dir", report_dir, "run directory")->required()->check(CLI::ExistingDirectory);

    CLI11_PARSE(app, argc, argv);

    try {
        if (report->parsed()) {
            std::ifstream is(std::filesystem::path(report_dir) / "summary.json");
            if (!is) throw Error("no summary.json in " + report_dir + " (run incomplete?)");
            print_summary(nlohmann::json::parse(is), std::cout);
            return 0;
        }
        for (const auto& k : kinds) {
            if (!app.got_subcommand(k)) continue;
            const ExperimentConfig cfg = build_config(k, opts[k]);
            RunOptions ro;
            ro.log = &std::cerr;
            ro.max_new_samples = stop_after[k];
            const RunRecord rec = run(cfg, ro);
            if (!rec.complete) {
                std::cout << "stopped with " << rec.rows.size() << " rows in " << cfg.out << "; rerun to resume\n";
                return 0;
            }
            print_summary(rec.summary_json(), std::cout);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
