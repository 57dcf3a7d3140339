// Command-line front end: simulate shot datasets, analyze them against region
// masks, sweep mask configurations, run offline truth checks, and emit report
// tables. Every failure exits nonzero with a machine-readable category on
// stderr; every run writes its resolved configuration next to its outputs.

#include <CLI11.hpp>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "spinsplit/harness.hpp"

namespace fs = std::filesystem;
using namespace spinsplit;

namespace {

void print_error(ErrorCategory category, const std::string& message) {
    json j;
    j["category"] = category_name(category);
    j["message"] = message;
    std::cerr << "error: " << j.dump() << '\n';
}

void ensure_out_dir(const std::string& out) {
    std::error_code ec;
    fs::create_directories(out, ec);
    require(!ec, ErrorCategory::io, "cannot create output directory: " + out);
}

void write_resolved_config(const json& cfg, const std::string& out_dir) {
    save_json(cfg, (fs::path(out_dir) / "config.resolved.json").string());
}

int run_simulate(const std::string& config_path, std::optional<std::uint64_t> seed,
                 const std::string& out) {
    RunConfig cfg = load_config(config_path);
    if (seed) cfg.seed = *seed;
    ensure_out_dir(out);
    simulate_to_dir(cfg, out);
    DatasetReader reader(out);
    write_resolved_config(reader.config_json(), out);
    std::cout << "wrote " << reader.shot_count() << " shots to " << out << '\n';
    return 0;
}

int run_analyze(const std::string& dataset, int offset, int width, const std::string& out) {
    DatasetReader reader(dataset);
    Analyzer analyzer(reader);
    const int gap_width = width > 0 ? width : analyzer.summary().cfg.masks.gap_width;
    const CriteriaReport report = analyzer.analyze_split(offset, gap_width);
    ensure_out_dir(out);
    const std::vector<CriteriaReport> reports = {report};
    write_reports_json((fs::path(out) / "reports.json").string(), reports);
    write_criteria_csv((fs::path(out) / "criteria.csv").string(), reports);
    write_resolved_config(reader.config_json(), out);
    std::cout << report.mask_descriptor << ": ratio " << report.splitting_ratio << ", E_ent "
              << report.e_ent.value << " +- " << report.e_ent.sem << ", E_epr(A->B) "
              << report.e_epr_ab.value << " +- " << report.e_epr_ab.sem << '\n';
    return 0;
}

int run_sweep(const std::string& dataset, const std::string& sweep, const std::string& out) {
    DatasetReader reader(dataset);
    Analyzer analyzer(reader);
    ensure_out_dir(out);
    write_resolved_config(reader.config_json(), out);
    const fs::path dir(out);

    if (sweep == "gap_position") {
        const auto reports = analyzer.sweep_gap_position();
        write_reports_json((dir / "reports.json").string(), reports);
        write_criteria_csv((dir / "criteria_vs_ratio.csv").string(), reports);
        std::cout << "gap-position sweep: " << reports.size() << " mask configurations\n";
        return 0;
    }
    if (sweep == "gap_width") {
        const auto reports = analyzer.sweep_gap_width();
        write_reports_json((dir / "reports.json").string(), reports);
        write_criteria_csv((dir / "criteria_vs_width.csv").string(), reports);
        write_atoms_csv((dir / "atoms_vs_width.csv").string(), reports);
        std::cout << "gap-width sweep: " << reports.size() << " widths\n";
        return 0;
    }
    if (sweep == "patterns") {
        const auto result = analyzer.sweep_patterns();
        for (const std::string& d : result.diagnostics) std::cerr << "skipped: " << d << '\n';
        write_reports_json((dir / "reports.json").string(), result.reports);
        write_criteria_csv((dir / "criteria_by_pattern.csv").string(), result.reports);
        std::cout << "pattern sweep: " << result.reports.size() << " patterns, "
                  << result.diagnostics.size() << " skipped\n";
        return 0;
    }
    if (sweep == "calibration") {
        const auto& offsets = analyzer.summary().cfg.masks.gap_offsets;
        const auto rows =
            analyzer.calibration_curve(offsets, analyzer.summary().cfg.masks.gap_width);
        write_calibration_csv((dir / "calibration_vs_ratio.csv").string(), rows);
        std::cout << "calibration sweep: " << rows.size() << " gap positions\n";
        return 0;
    }
    fail(ErrorCategory::usage,
         "unknown sweep '" + sweep + "' (expected gap_position, gap_width, patterns, calibration)");
}

int run_oracle(const std::string& dataset) {
    DatasetReader reader(dataset);
    const auto checks = oracle_checks(reader);
    int failed = 0;
    for (const OracleCheck& c : checks) {
        std::cout << (c.passed ? "[PASS] " : "[FAIL] ") << c.name << " (" << c.detail << ")\n";
        if (!c.passed) ++failed;
    }
    if (failed > 0) {
        print_error(ErrorCategory::domain, std::to_string(failed) + " oracle checks failed");
        return category_exit_code(ErrorCategory::domain);
    }
    return 0;
}

int run_report(const std::string& in, const std::string& format, const std::string& out) {
    const auto reports = load_reports_json(in);
    ensure_out_dir(out);
    const fs::path dir(out);
    if (format == "csv") {
        write_criteria_csv((dir / "criteria.csv").string(), reports);
        write_atoms_csv((dir / "atoms.csv").string(), reports);
    } else if (format == "structured-text") {
        write_reports_json((dir / "reports.json").string(), reports);
    } else {
        fail(ErrorCategory::usage,
             "unknown format '" + format + "' (expected csv or structured-text)");
    }
    std::cout << "wrote " << reports.size() << " report records to " << out << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Synthetic split-cloud spin-correlation experiments: simulation and analysis"};
    app.require_subcommand(1);

    std::string config_path, dataset, out, sweep_name, report_in;
    std::string format = "csv";
    std::optional<std::uint64_t> seed;
    int offset = 0;
    int width = 0;

    CLI::App* simulate = app.add_subcommand("simulate", "generate a shot dataset");
    simulate->add_option("--config", config_path, "run configuration (JSON)")->required();
    simulate->add_option("--seed", seed, "override the configured master seed");
    simulate->add_option("--out", out, "dataset output directory")->required();

    CLI::App* analyze = app.add_subcommand("analyze", "criteria for one split-mask configuration");
    analyze->add_option("--dataset", dataset, "dataset directory")->required();
    analyze->add_option("--offset", offset, "gap offset from the cloud centroid (pixels)");
    analyze->add_option("--width", width, "gap width (pixels, 0 = configured default)");
    analyze->add_option("--out", out, "output directory")->required();

    CLI::App* sweep = app.add_subcommand("sweep", "criteria across mask configurations");
    sweep->add_option("--dataset", dataset, "dataset directory")->required();
    sweep->add_option("--sweep", sweep_name, "gap_position | gap_width | patterns | calibration")
        ->required();
    sweep->add_option("--out", out, "output directory")->required();

    CLI::App* oracle = app.add_subcommand("oracle", "offline truth-record consistency checks");
    oracle->add_option("--dataset", dataset, "dataset directory")->required();

    CLI::App* report = app.add_subcommand("report", "re-emit report records as tables");
    report->add_option("--in", report_in, "reports.json produced by analyze/sweep")->required();
    report->add_option("--format", format, "csv | structured-text");
    report->add_option("--out", out, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        print_error(ErrorCategory::usage, e.what());
        return category_exit_code(ErrorCategory::usage);
    }

    try {
        if (simulate->parsed()) return run_simulate(config_path, seed, out);
        if (analyze->parsed()) return run_analyze(dataset, offset, width, out);
        if (sweep->parsed()) return run_sweep(dataset, sweep_name, out);
        if (oracle->parsed()) return run_oracle(dataset);
        if (report->parsed()) return run_report(report_in, format, out);
    } catch (const Error& e) {
        print_error(e.category(), e.what());
        return e.exit_code();
    } catch (const std::exception& e) {
        print_error(ErrorCategory::internal, e.what());
        return category_exit_code(ErrorCategory::internal);
    }
    return 0;
}
