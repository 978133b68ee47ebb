#include "nodal/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace nodal {

namespace fs = std::filesystem;

nlohmann::json SampleRow::to_json() const {
    nlohmann::json j = {{"degree", degree}, {"index", index}, {"ok", ok}, {"fields", fields}, {"wall_ms", wall_ms}};
    if (!ok) j["error"] = error;
    return j;
}

SampleRow SampleRow::from_json(const nlohmann::json& j) {
    SampleRow r;
    r.degree = j.at("degree").get<int>();
    r.index = j.at("index").get<int>();
    r.ok = j.at("ok").get<bool>();
    r.fields = j.at("fields").get<std::vector<std::string>>();
    r.wall_ms = j.value("wall_ms", 0.0);
    r.error = j.value("error", "");
    return r;
}

namespace {

void write_atomic(const fs::path& path, const std::string& text) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw Error("cannot write " + tmp.string());
        os << text;
        os.flush();
        if (!os) throw Error("write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("cannot read " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size();
}

std::string header_line(const RunRecord& r) {
    return "# nodalstat samples v" + std::to_string(kCsvSchemaVersion) + " kind=" + to_string(r.config.kind) +
           " config=" + r.config_hash + "\n";
}

void compute_stats(RunRecord& r) {
    r.stats.clear();
    r.skipped = 0;
    std::map<int, std::vector<const SampleRow*>> by_degree;
    for (const auto& row : r.rows) {
        if (row.ok)
            by_degree[row.degree].push_back(&row);
        else
            ++r.skipped;
    }
    for (const auto& [d, rows] : by_degree) {
        for (std::size_t c = 0; c < r.columns.size(); ++c) {
            std::vector<double> v;
            bool numeric = true;
            for (const SampleRow* row : rows) {
                double x;
                if (!parse_double(row->fields[c], x)) {
                    numeric = false;
                    break;
                }
                v.push_back(x);
            }
            if (numeric && !v.empty()) r.stats[d][r.columns[c]] = jackknife(v);
        }
    }
    r.scaling.reset();
    r.scaling_error.clear();
    if (r.config.kind == ExperimentKind::VarianceScan) {
        const auto col = std::find(r.columns.begin(), r.columns.end(), "n_domains") - r.columns.begin();
        std::map<int, std::vector<double>> values;
        for (const auto& row : r.rows)
            if (row.ok) values[row.degree].push_back(std::stod(row.fields[col]));
        try {
            r.scaling = variance_scan_report(values);
        } catch (const DomainError& e) {
            r.scaling_error = e.what();
        }
    }
}

nlohmann::json derived(const RunRecord& r) {
    auto col = [&](const std::string& name) {
        return std::find(r.columns.begin(), r.columns.end(), name) - r.columns.begin();
    };
    nlohmann::json d = nlohmann::json::object();
    if (r.config.kind == ExperimentKind::Caricature) {
        int valid = 0, matched = 0, all_matched = 0, ok = 0;
        for (const auto& row : r.rows) {
            if (!row.ok) continue;
            ++ok;
            const bool m = row.fields[col("match")] == "1";
            all_matched += m;
            if (row.fields[col("regime_ok")] == "1") {
                ++valid;
                matched += m;
            }
        }
        d = {{"trials", ok}, {"regime_valid", valid}, {"matched_in_regime", matched},
             {"match_rate_in_regime", valid ? double(matched) / valid : 0.0}, {"matched_all", all_matched}};
    } else if (r.config.kind == ExperimentKind::Lemmas) {
        std::map<std::string, std::pair<int, int>> per;  // instances, violations
        for (const auto& row : r.rows) {
            if (!row.ok) continue;
            auto& p = per[row.fields[0]];
            ++p.first;
            p.second += row.fields[1] != "1";
        }
        for (const auto& [id, p] : per) d[id] = {{"instances", p.first}, {"violations", p.second}};
    } else if (r.config.kind == ExperimentKind::LoopModel) {
        double lo = std::numeric_limits<double>::infinity();
        for (const auto& [deg, cols] : r.stats)
            if (cols.count("variance_over_n")) lo = std::min(lo, cols.at("variance_over_n").mean);
        if (std::isfinite(lo)) d["min_mean_variance_over_n"] = lo;
    }
    return d;
}

}  // namespace

std::string RunRecord::samples_csv() const {
    std::string out = header_line(*this) + "degree,index,status";
    for (const auto& c : columns) out += "," + c;
    out += "\n";
    for (const auto& row : rows) {
        out += std::to_string(row.degree) + "," + std::to_string(row.index) + "," + (row.ok ? "ok" : "skipped");
        for (std::size_t c = 0; c < columns.size(); ++c) out += "," + (row.ok ? row.fields[c] : std::string());
        out += "\n";
    }
    return out;
}

std::vector<SampleRow> parse_samples_csv(const std::string& text, std::vector<std::string>* columns) {
    std::istringstream is(text);
    std::string line;
    const std::string magic = "# nodalstat samples v" + std::to_string(kCsvSchemaVersion) + " ";
    if (!std::getline(is, line) || line.rfind(magic, 0) != 0) throw Error("not a nodalstat samples file of this schema");
    if (!std::getline(is, line)) throw Error("samples file has no column line");
    auto split = [](const std::string& s) {
        std::vector<std::string> v;
        std::string cell;
        std::istringstream ls(s);
        while (std::getline(ls, cell, ',')) v.push_back(cell);
        if (!s.empty() && s.back() == ',') v.push_back("");
        return v;
    };
    std::vector<std::string> head = split(line);
    if (head.size() < 3 || head[0] != "degree" || head[1] != "index" || head[2] != "status")
        throw Error("unexpected samples column line");
    if (columns) columns->assign(head.begin() + 3, head.end());
    std::vector<SampleRow> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto cells = split(line);
        if (cells.size() != head.size()) throw Error("samples row has " + std::to_string(cells.size()) + " cells");
        SampleRow r;
        r.degree = std::stoi(cells[0]);
        r.index = std::stoi(cells[1]);
        r.ok = cells[2] == "ok";
        if (r.ok) r.fields.assign(cells.begin() + 3, cells.end());
        rows.push_back(std::move(r));
    }
    return rows;
}

nlohmann::json RunRecord::summary_json() const {
    nlohmann::json st = nlohmann::json::object();
    for (const auto& [d, cols] : stats)
        for (const auto& [name, s] : cols)
            st[std::to_string(d)][name] = {{"n", s.n},
                                           {"mean", s.mean},
                                           {"mean_se", s.mean_se},
                                           {"variance", s.variance},
                                           {"variance_se", s.variance_se}};
    nlohmann::json skipped_rows = nlohmann::json::array();
    for (const auto& row : rows)
        if (!row.ok) skipped_rows.push_back({{"degree", row.degree}, {"index", row.index}, {"error", row.error}});
    nlohmann::json j = {{"version", kSoftwareVersion},
                        {"config_hash", config_hash},
                        {"kind", to_string(config.kind)},
                        {"complete", complete},
                        {"rows", rows.size()},
                        {"skipped", skipped_rows},
                        {"stats", st},
                        {"derived", derived(*this)},
                        {"wall_time_s", wall_time_s}};
    if (scaling) j["scaling"] = scaling->to_json();
    if (!scaling_error.empty()) j["scaling_error"] = scaling_error;
    return j;
}

RunRecord run(const ExperimentConfig& config, const RunOptions& opts) {
    config.validate();
    const auto t0 = std::chrono::steady_clock::now();
    RunRecord rec;
    rec.config = config;
    rec.config_hash = config.hash();
    rec.columns = sample_columns(config.kind);

    const fs::path dir(config.out);
    fs::create_directories(dir);
    const fs::path manifest = dir / "manifest.json", partial = dir / "samples.partial.jsonl";
    if (fs::exists(manifest)) {
        const auto old = nlohmann::json::parse(read_file(manifest), nullptr, false);
        if (old.is_discarded() || old.value("config_hash", "") != rec.config_hash)
            throw Error("output directory " + dir.string() + " holds a run with a different config");
    }
    write_atomic(manifest, nlohmann::json{{"version", kSoftwareVersion},
                                          {"config", config.to_json()},
                                          {"config_hash", rec.config_hash},
                                          {"csv_schema", kCsvSchemaVersion},
                                          {"columns", rec.columns}}
                                   .dump(2) +
                               "\n");

    // completed rows of an interrupted run; a torn last line is dropped
    std::set<std::pair<int, int>> wanted, done;
    for (int d : config.degrees)
        for (int i = 0; i < config.samples; ++i) wanted.insert({d, i});
    std::string kept;
    if (fs::exists(partial)) {
        std::istringstream is(read_file(partial));
        std::string line;
        while (std::getline(is, line)) {
            const auto j = nlohmann::json::parse(line, nullptr, false);
            if (j.is_discarded()) continue;
            SampleRow r;
            try {
                r = SampleRow::from_json(j);
            } catch (const nlohmann::json::exception&) {
                continue;
            }
            const std::pair<int, int> key{r.degree, r.index};
            if (!wanted.count(key) || done.count(key) || (r.ok && r.fields.size() != rec.columns.size())) continue;
            done.insert(key);
            rec.rows.push_back(std::move(r));
            kept += line + "\n";
        }
        write_atomic(partial, kept);
    }
    rec.resumed = static_cast<int>(rec.rows.size());

    std::vector<std::pair<int, int>> tasks;
    for (const auto& k : wanted)
        if (!done.count(k)) tasks.push_back(k);

    std::ofstream log_os(partial, std::ios::app | std::ios::binary);
    if (!log_os) throw Error("cannot append to " + partial.string());
    std::mutex mu;
    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};
    long fresh = 0;
    auto worker = [&] {
        for (;;) {
            if (stop) return;
            const std::size_t t = next++;
            if (t >= tasks.size()) return;
            SampleRow row = run_sample(config, tasks[t].first, tasks[t].second);
            std::lock_guard lock(mu);
            log_os << row.to_json().dump() << "\n";
            log_os.flush();
            if (!row.ok && opts.log)
                *opts.log << "skipped degree " << row.degree << " sample " << row.index << ": " << row.error << "\n";
            rec.rows.push_back(std::move(row));
            if (opts.max_new_samples >= 0 && ++fresh >= opts.max_new_samples) stop = true;
        }
    };
    const int width = std::max(1, std::min<int>(config.jobs, static_cast<int>(tasks.size())));
    std::vector<std::thread> pool;
    for (int w = 0; w < width; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    log_os.close();

    std::sort(rec.rows.begin(), rec.rows.end(),
              [](const SampleRow& a, const SampleRow& b) { return std::tie(a.degree, a.index) < std::tie(b.degree, b.index); });
    rec.complete = rec.rows.size() == wanted.size();
    compute_stats(rec);
    rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!rec.complete) return rec;

    write_atomic(dir / "samples.csv", rec.samples_csv());
    std::string timings = "degree,index,wall_ms\n";
    for (const auto& row : rec.rows)
        timings += std::to_string(row.degree) + "," + std::to_string(row.index) + "," + std::to_string(row.wall_ms) + "\n";
    write_atomic(dir / "timings.csv", timings);
    write_atomic(dir / "summary.json", rec.summary_json().dump(2) + "\n");
    fs::remove(partial);
    return rec;
}

}  // namespace nodal
