// anovats: command-line front end for the homogeneity test, the post-hoc
// clustering, the preprocessing pipeline and the simulation experiments.
//
// Exit status: 0 on success, 1 when the data fail a module check, 2 on
// usage errors.

#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "anovats/anovats.hpp"

namespace {

using namespace anovats;

constexpr int exit_data_error = 1;
constexpr int exit_usage_error = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PanelOptions {
    std::string input;
    std::string layout = "long";
    std::optional<double> max_missing_fraction;
    std::string from;
    std::string to;
};

struct TestOptions {
    double alpha = 0.05;
    double c = 2.5;
    std::optional<std::size_t> b;
};

struct Config {
    PanelOptions panel;
    TestOptions test;
    std::string output;
    std::uint64_t seed = 1;
    std::optional<std::size_t> reps;
    bool quick = false;
    double shift = 0.0;
};

CsvLayout parse_layout(const std::string& name) { return name == "wide" ? CsvLayout::wide_format : CsvLayout::long_format; }

void add_panel_flags(CLI::App& cmd, PanelOptions& opt) {
    cmd.add_option("--input", opt.input, "Panel CSV file")->required();
    cmd.add_option("--layout", opt.layout, "CSV layout: long (area,time,value) or wide (one column per area)")
        ->check(CLI::IsMember({"long", "wide"}))
        ->capture_default_str();
    cmd.add_option("--max-missing-fraction", opt.max_missing_fraction,
                   "Drop areas whose share of missing cells exceeds this value, before --from/--to")
        ->check(CLI::Range(0.0, 1.0));
    cmd.add_option("--from", opt.from, "First time label to keep (inclusive)");
    cmd.add_option("--to", opt.to, "Last time label to keep (inclusive)");
}

void add_test_flags(CLI::App& cmd, TestOptions& opt) {
    cmd.add_option("--alpha", opt.alpha, "Significance level in (0, 1)")->capture_default_str();
    auto* c = cmd.add_option("--c", opt.c, "Block constant: b = floor(c * n^(1/3))")
                  ->check(CLI::PositiveNumber)
                  ->capture_default_str();
    auto* b = cmd.add_option("--b", opt.b, "Explicit block length, clamped to [2, n-1]")->check(CLI::PositiveNumber);
    c->excludes(b);
}

void check_alpha_flag(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw UsageError("--alpha must lie strictly between 0 and 1");
}

CompletePanel load_panel(const PanelOptions& opt) {
    Panel panel = read_csv(opt.input, parse_layout(opt.layout));
    if (opt.max_missing_fraction) panel = drop_incomplete_groups(panel, *opt.max_missing_fraction);
    if (!opt.from.empty() || !opt.to.empty()) {
        if (panel.time_index().empty()) throw Error("panel", "--from/--to need time labels in the input");
        const std::string from = opt.from.empty() ? panel.time_index().front() : opt.from;
        const std::string to = opt.to.empty() ? panel.time_index().back() : opt.to;
        panel = restrict_time(panel, from, to);
    }
    return CompletePanel(std::move(panel));
}

BlockRule block_rule(const TestOptions& opt) { return BlockRule{opt.c, opt.b}; }

// Writes to the file when a path is given, otherwise to stdout.
void emit(const std::string& path, const std::string& text) {
    if (path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cli", "cannot write '" + path + "'");
    out << text;
}

int run_test(const Config& cfg) {
    check_alpha_flag(cfg.test.alpha);
    const TestResult result = test(load_panel(cfg.panel), block_rule(cfg.test), cfg.test.alpha);
    const std::string json_text = to_json(result).dump(2) + "\n";
    if (cfg.output.empty()) {
        std::cout << json_text;
    } else {
        emit(cfg.output, json_text);
    }
    std::cout << summary_line(result) << '\n';
    return 0;
}

int run_cluster(const Config& cfg) {
    check_alpha_flag(cfg.test.alpha);
    const ClusterResult result = cluster(load_panel(cfg.panel), block_rule(cfg.test), cfg.test.alpha);
    std::cout << render_tree(result);
    if (!cfg.output.empty()) emit(cfg.output, to_json(result).dump(2) + "\n");
    return 0;
}

int run_preprocess(const Config& cfg) {
    if (cfg.output.empty()) throw UsageError("preprocess needs --output for the quarterly CSV");
    const Panel monthly = read_csv(cfg.panel.input, parse_layout(cfg.panel.layout));
    prep::PreprocessOptions options;
    options.shift = cfg.shift;
    const auto result = prep::preprocess(monthly, options);
    write_csv(cfg.output, result.quarterly, CsvLayout::long_format);
    emit(cfg.output + ".json", to_json(result).dump(2) + "\n");
    std::cout << "wrote " << result.quarterly.num_groups() << " areas x " << result.quarterly.num_times()
              << " quarters to " << cfg.output << '\n';
    return 0;
}

// Reads `key = value` lines; `#` starts a comment.
std::map<std::string, std::string> read_key_values(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cli", "cannot open '" + path + "'");
    std::map<std::string, std::string> out;
    std::string line;
    std::size_t number = 0;
    auto trim = [](std::string s) {
        const auto first = s.find_first_not_of(" \t\r");
        if (first == std::string::npos) return std::string();
        return s.substr(first, s.find_last_not_of(" \t\r") - first + 1);
    };
    while (std::getline(in, line)) {
        ++number;
        line = trim(line.substr(0, line.find('#')));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw Error("cli", "config line " + std::to_string(number) + " is not of the form key = value");
        out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return out;
}

template <typename T>
T config_number(const std::map<std::string, std::string>& kv, const std::string& key, std::optional<T> fallback = {}) {
    const auto it = kv.find(key);
    if (it == kv.end()) {
        if (fallback) return *fallback;
        throw Error("cli", "config is missing '" + key + "'");
    }
    std::istringstream is(it->second);
    T value{};
    if (!(is >> value) || !is.eof()) throw Error("cli", "config value for '" + key + "' is not a number");
    return value;
}

int run_simulate(const Config& cfg) {
    const auto kv = read_key_values(cfg.panel.input);
    for (const auto& [key, value] : kv) {
        static const std::vector<std::string> known{"process", "case", "a", "n", "effects", "burn_in", "stream"};
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw Error("cli", "unknown config key '" + key + "'");
    }
    const int process = config_number<int>(kv, "process");
    const int case_id = config_number<int>(kv, "case", 1);
    if (case_id != 1 && case_id != 2) throw Error("cli", "config 'case' must be 1 or 2");
    const auto a = config_number<std::size_t>(kv, "a");
    const auto n = config_number<std::size_t>(kv, "n");
    std::vector<double> effects;
    if (const auto it = kv.find("effects"); it != kv.end()) {
        std::stringstream ss(it->second);
        std::string item;
        while (std::getline(ss, item, ',')) {
            try {
                std::size_t used = 0;
                effects.push_back(std::stod(item, &used));
                if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
            } catch (const std::logic_error&) {
                throw Error("cli", "config 'effects' must be a comma-separated list of numbers");
            }
        }
    }
    auto spec = sim::standard_process(process, case_id == 1 ? sim::Dependence::case1_independent
                                                            : sim::Dependence::case2_correlated,
                                      a, n, effects);
    spec.burn_in = config_number<std::size_t>(kv, "burn_in", spec.burn_in);
    const auto stream = config_number<std::uint64_t>(kv, "stream", 0);
    const harness::Draw draw =
        harness::draw_panel([&](sim::RngStream& rng) { return sim::assemble_panel(spec, rng); }, cfg.seed, stream);
    std::ostringstream out;
    write_csv(out, draw.panel->panel(), CsvLayout::wide_format);
    emit(cfg.output, out.str());
    return 0;
}

int run_size(const Config& cfg) {
    check_alpha_flag(cfg.test.alpha);
    harness::SizeExperiment exp;
    if (cfg.quick) {
        exp.a_list = {3};
        exp.n_list = {20, 50};
        exp.c_list = {1.5, 2.5, 4};
        exp.reps = 50;
    }
    if (cfg.reps) exp.reps = *cfg.reps;
    exp.alpha = cfg.test.alpha;
    std::ostringstream out;
    harness::write_report(out, harness::run_size(exp, cfg.seed));
    emit(cfg.output, out.str());
    return 0;
}

int run_power(const Config& cfg) {
    check_alpha_flag(cfg.test.alpha);
    harness::PowerExperiment exp;
    if (cfg.quick) {
        exp.n_list = {30, 50};
        exp.reps = 50;
    }
    if (cfg.reps) exp.reps = *cfg.reps;
    exp.alpha = cfg.test.alpha;
    exp.c = cfg.test.c;
    std::ostringstream out;
    harness::write_report(out, harness::run_power(exp, cfg.seed));
    emit(cfg.output, out.str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Homogeneity test of group means for short panels of time series, with post-hoc clustering"};
    app.require_subcommand(1);
    Config cfg;

    auto* test_cmd = app.add_subcommand("test", "Test equality of the area means; prints the result as JSON");
    add_panel_flags(*test_cmd, cfg.panel);
    add_test_flags(*test_cmd, cfg.test);
    test_cmd->add_option("--output", cfg.output, "Write the JSON result to this file instead of stdout");

    auto* cluster_cmd = app.add_subcommand("cluster", "Recursive post-hoc division of the areas into groups");
    add_panel_flags(*cluster_cmd, cfg.panel);
    add_test_flags(*cluster_cmd, cfg.test);
    cluster_cmd->add_option("--output", cfg.output, "Also write the clustering as JSON to this file");

    auto* prep_cmd = app.add_subcommand("preprocess", "Monthly CSV to complete quarterly CSV (Box-Cox, AR imputation)");
    prep_cmd->add_option("--input", cfg.panel.input, "Monthly CSV with YYYY-MM time labels")->required();
    prep_cmd->add_option("--layout", cfg.panel.layout, "CSV layout of the input: long or wide")
        ->check(CLI::IsMember({"long", "wide"}))
        ->capture_default_str();
    prep_cmd->add_option("--output", cfg.output, "Quarterly CSV (long); the fit summary goes to <output>.json")
        ->required();
    prep_cmd->add_option("--shift", cfg.shift, "Constant added before the Box-Cox transform (for values <= 0)")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();

    auto* sim_cmd = app.add_subcommand("simulate", "Generate one synthetic panel as wide CSV");
    sim_cmd->add_option("--input", cfg.panel.input,
                        "Config file of key = value lines: process (1-4), case (1|2), a, n, effects (comma list), "
                        "burn_in, stream")
        ->required();
    sim_cmd->add_option("--output", cfg.output, "Output CSV (default stdout)");
    sim_cmd->add_option("--seed", cfg.seed, "Random seed")->capture_default_str();

    auto* size_cmd = app.add_subcommand("size", "Empirical size over the simulation grid (CSV report)");
    auto* power_cmd = app.add_subcommand("power", "Power of the post-hoc division over the simulation grid (CSV report)");
    for (auto* cmd : {size_cmd, power_cmd}) {
        cmd->add_option("--output", cfg.output, "Report CSV (default stdout)");
        cmd->add_option("--seed", cfg.seed, "Random seed")->capture_default_str();
        cmd->add_option("--reps", cfg.reps, "Replications per cell (default 200, or 50 with --quick)")
            ->check(CLI::PositiveNumber);
        cmd->add_flag("--quick", cfg.quick, "Reduced grid");
        cmd->add_option("--alpha", cfg.test.alpha, "Significance level in (0, 1)")->capture_default_str();
        cmd->footer("Set ANOVATS_THREADS to cap the number of worker threads.");
    }
    power_cmd->add_option("--c", cfg.test.c, "Block constant")->check(CLI::PositiveNumber)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_usage_error;
    }

    try {
        if (*test_cmd) return run_test(cfg);
        if (*cluster_cmd) return run_cluster(cfg);
        if (*prep_cmd) return run_preprocess(cfg);
        if (*sim_cmd) return run_simulate(cfg);
        if (*size_cmd) return run_size(cfg);
        if (*power_cmd) return run_power(cfg);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return exit_usage_error;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_data_error;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_data_error;
    }
    return exit_usage_error;
}
