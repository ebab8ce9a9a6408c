// Command-line front end: model/data generation, pruning, sweeps,
// certificates and empirical evaluation.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "sipp/harness.hpp"
#include "sipp/io.hpp"

namespace {

using namespace sipp;

struct CommonOptions {
    std::string model;
    std::string data;
    std::string test_data;
    std::string strategy = "det";
    std::optional<std::size_t> budget;
    std::optional<double> ratio;
    double delta = 0.1;
    double c = 2.0;
    double k = 1.0;
    std::uint64_t seed = 0;
    std::string out;
    std::optional<std::size_t> sample_size;
    std::size_t floor = 1;
};

void add_common(CLI::App* cmd, CommonOptions& o, bool need_test_data) {
    cmd->add_option("--model", o.model, "Model bundle directory")->required();
    cmd->add_option("--data", o.data, "Tensor file with the sensitivity (validation) split")->required();
    auto* test = cmd->add_option("--test-data", o.test_data, "Tensor file with the test split");
    if (need_test_data) test->required();
    cmd->add_option("--strategy", o.strategy, "det | rand | hybrid | simple | wt");
    cmd->add_option("--delta", o.delta, "Failure probability in (0, 1)");
    cmd->add_option("--c-const", o.c, "Regularity constant C");
    cmd->add_option("--k-const", o.k, "Regularity constant K");
    cmd->add_option("--seed", o.seed, "Master seed");
    cmd->add_option("--sample-size", o.sample_size, "Override the sample set size |S|");
    cmd->add_option("--floor", o.floor, "Minimum weights kept per group (det/rand/hybrid)");
}

BoundParams params_of(const CommonOptions& o) {
    BoundParams p;
    p.c = o.c;
    p.k = o.k;
    p.delta = o.delta;
    return p;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, ',')) {
        if (!cur.empty()) out.push_back(cur);
    }
    return out;
}

void emit(const std::string& text, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream f(out_path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + out_path);
    f << text;
}

int fail(const std::string& kind, const std::string& message) {
    nlohmann::json j{{"error", kind}, {"message", message}};
    std::cerr << j.dump() << std::endl;
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sensitivity-informed provable pruning of feed-forward networks"};
    app.require_subcommand(1);

    // gen-model
    std::string gm_input, gm_layers, gm_init = "uniform_nonneg", gm_out;
    std::uint64_t gm_seed = 0;
    bool gm_bias = false;
    auto* gen_model_cmd = app.add_subcommand("gen-model", "Generate a random model bundle");
    gen_model_cmd->add_option("--input", gm_input, "Per-sample input shape, e.g. 16 or 1x8x8")->required();
    gen_model_cmd->add_option("--layers", gm_layers, "e.g. dense:16:relu,dense:8:identity")->required();
    gen_model_cmd->add_option("--init", gm_init, "uniform_nonneg | gaussian");
    gen_model_cmd->add_option("--seed", gm_seed);
    gen_model_cmd->add_flag("--bias", gm_bias, "Add biases drawn from the same law");
    gen_model_cmd->add_option("--out", gm_out, "Output bundle directory")->required();

    // gen-data
    std::string gd_shape, gd_dist = "uniform_nonneg", gd_out;
    std::size_t gd_count = 0;
    std::uint64_t gd_seed = 0;
    auto* gen_data_cmd = app.add_subcommand("gen-data", "Generate a tensor batch file");
    gen_data_cmd->add_option("--shape", gd_shape, "Per-sample shape")->required();
    gen_data_cmd->add_option("--dist", gd_dist, "uniform_nonneg | gaussian");
    gen_data_cmd->add_option("--count", gd_count, "Number of samples")->required();
    gen_data_cmd->add_option("--seed", gd_seed);
    gen_data_cmd->add_option("--out", gd_out, "Output tensor file")->required();

    // prune
    CommonOptions pr;
    bool pr_export = false;
    auto* prune_cmd = app.add_subcommand("prune", "Prune a model and write the pruned bundle plus reports");
    add_common(prune_cmd, pr, false);
    auto* pr_budget = prune_cmd->add_option("--budget", pr.budget, "Weights to keep");
    auto* pr_ratio = prune_cmd->add_option("--ratio", pr.ratio, "Fraction of weights to remove");
    pr_budget->excludes(pr_ratio);
    prune_cmd->add_option("--out", pr.out, "Output directory")->required();
    prune_cmd->add_flag("--export-sensitivity", pr_export, "Also write sensitivity.csv");

    // sweep
    CommonOptions sw;
    std::string sw_ratios;
    auto* sweep_cmd = app.add_subcommand("sweep", "Prune at several ratios and emit a CSV report");
    add_common(sweep_cmd, sw, true);
    sweep_cmd->add_option("--ratios", sw_ratios, "Comma-separated prune ratios")->required();
    sweep_cmd->add_option("--out", sw.out, "CSV output path (stdout if omitted)");

    // bound
    CommonOptions bd;
    auto* bound_cmd = app.add_subcommand("bound", "Compute the certificate for a budget without pruning");
    add_common(bound_cmd, bd, false);
    auto* bd_budget = bound_cmd->add_option("--budget", bd.budget, "Weights to keep");
    auto* bd_ratio = bound_cmd->add_option("--ratio", bd.ratio, "Fraction of weights to remove");
    bd_budget->excludes(bd_ratio);
    bound_cmd->add_option("--out", bd.out, "JSON output path (stdout if omitted)");

    // eval
    std::string ev_model, ev_pruned, ev_test, ev_out;
    std::optional<double> ev_eps;
    auto* eval_cmd = app.add_subcommand("eval", "Empirical relative errors of a pruned model against its reference");
    eval_cmd->add_option("--model", ev_model, "Reference model bundle")->required();
    eval_cmd->add_option("--pruned", ev_pruned, "Pruned model bundle")->required();
    eval_cmd->add_option("--test-data", ev_test, "Tensor file with the test split")->required();
    eval_cmd->add_option("--eps", ev_eps, "Certificate value for the coverage fraction");
    eval_cmd->add_option("--out", ev_out, "JSON output path (stdout if omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        nlohmann::json j{{"error", "usage"}, {"message", e.what()}};
        std::cerr << j.dump() << std::endl;
        return 2;
    }

    try {
        if (*gen_model_cmd) {
            const auto net = gen_model(parse_shape(gm_input), gm_layers, parse_init(gm_init), gm_seed, gm_bias);
            save_model(gm_out, net);
        } else if (*gen_data_cmd) {
            write_tensor_file(gd_out, gen_data(parse_shape(gd_shape), parse_init(gd_dist), gd_count, gd_seed));
        } else if (*prune_cmd) {
            RunConfig cfg;
            cfg.model = pr.model;
            cfg.data = pr.data;
            cfg.test_data = pr.test_data;
            cfg.strategy = parse_run_strategy(pr.strategy);
            cfg.budget = pr.budget;
            cfg.ratio = pr.ratio;
            cfg.params = params_of(pr);
            cfg.seed = pr.seed;
            cfg.out = pr.out;
            cfg.sample_size = pr.sample_size;
            cfg.floor = pr.floor;
            cfg.export_sensitivity = pr_export;
            std::cout << report_to_json(prune_run(cfg)) << '\n';
        } else if (*sweep_cmd) {
            std::vector<double> ratios;
            for (const auto& r : split_list(sw_ratios)) ratios.push_back(std::stod(r));
            std::vector<RunStrategy> strategies;
            for (const auto& s : split_list(sw.strategy)) strategies.push_back(parse_run_strategy(s));
            const auto net = load_model(sw.model);
            const auto ctx = prepare_sensitivity(net, read_tensor_file(sw.data), params_of(sw), sw.seed, sw.sample_size);
            const auto rows = sweep(ctx, read_tensor_file(sw.test_data), ratios, strategies, sw.seed, sw.floor);
            emit(sweep_csv(rows), sw.out);
        } else if (*bound_cmd) {
            const auto net = load_model(bd.model);
            const auto budget = resolve_budget(bd.budget, bd.ratio, net.prunable_count());
            const auto ctx = prepare_sensitivity(net, read_tensor_file(bd.data), params_of(bd), bd.seed, bd.sample_size);
            const auto plan = make_plan(ctx, parse_run_strategy(bd.strategy), budget, bd.floor);
            emit(certificate_to_json(network_certificate(ctx.net, plan, ctx.trace, ctx.params)) + "\n", bd.out);
        } else if (*eval_cmd) {
            const auto stats = evaluate_errors(load_model(ev_model), load_model(ev_pruned), read_tensor_file(ev_test), ev_eps);
            emit(stats_to_json(stats) + "\n", ev_out);
        }
    } catch (const std::invalid_argument& e) {
        return fail("invalid_argument", e.what());
    } catch (const std::out_of_range& e) {
        return fail("out_of_range", e.what());
    } catch (const std::exception& e) {
        return fail("runtime", e.what());
    }
    return 0;
}
