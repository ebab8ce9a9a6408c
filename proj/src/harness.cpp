#include "sipp/harness.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "json.hpp"
#include "sipp/io.hpp"
#include "sipp/random.hpp"

namespace sipp {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, sep)) out.push_back(cur);
    return out;
}

std::size_t parse_size(const std::string& s, const std::string& what) {
    std::size_t v = 0;
    const auto* end = s.data() + s.size();
    auto [p, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || p != end) throw std::invalid_argument("invalid " + what + " '" + s + "'");
    return v;
}

std::string num(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, p);
}

json finite_or_null(double v) {
    if (std::isfinite(v)) return v;
    return nullptr;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

constexpr std::uint64_t kSampleStream = 0x53414d504c45ull;  // seed stream for choosing S

}  // namespace

std::string to_string(RunStrategy s) {
    switch (s) {
        case RunStrategy::Det: return "det";
        case RunStrategy::Rand: return "rand";
        case RunStrategy::Hybrid: return "hybrid";
        case RunStrategy::Simple: return "simple";
        case RunStrategy::Wt: return "wt";
    }
    return "det";
}

RunStrategy parse_run_strategy(const std::string& name) {
    if (name == "det") return RunStrategy::Det;
    if (name == "rand") return RunStrategy::Rand;
    if (name == "hybrid") return RunStrategy::Hybrid;
    if (name == "simple") return RunStrategy::Simple;
    if (name == "wt") return RunStrategy::Wt;
    throw std::invalid_argument("unknown strategy '" + name + "' (det, rand, hybrid, simple, wt)");
}

InitKind parse_init(const std::string& name) {
    if (name == "uniform_nonneg") return InitKind::UniformNonneg;
    if (name == "gaussian") return InitKind::Gaussian;
    throw std::invalid_argument("unknown distribution '" + name + "' (uniform_nonneg, gaussian)");
}

Shape parse_shape(const std::string& text) {
    Shape shape;
    for (const auto& part : split(text, 'x')) shape.push_back(parse_size(part, "shape extent"));
    if (shape.empty() || std::find(shape.begin(), shape.end(), 0) != shape.end()) {
        throw std::invalid_argument("shape '" + text + "' must have positive extents");
    }
    return shape;
}

Network gen_model(const Shape& input_shape, const std::string& description, InitKind init, std::uint64_t seed,
                  bool with_bias) {
    auto rng = seeded_engine(seed);
    std::vector<LayerSpec> layers;
    Shape current = input_shape;
    for (const auto& item : split(description, ',')) {
        auto tok = split(item, ':');
        if (tok.size() < 2) throw std::invalid_argument("bad layer description '" + item + "'");
        LayerSpec layer;
        layer.activation = parse_activation(tok.back());
        tok.pop_back();
        if (tok[0] == "dense") {
            if (tok.size() != 2) throw std::invalid_argument("dense layer needs dense:OUT:ACT, got '" + item + "'");
            layer.kind = DenseShape{parse_size(tok[1], "out_features"), shape_volume(current)};
        } else if (tok[0] == "conv") {
            if (tok.size() < 4 || tok.size() > 6) {
                throw std::invalid_argument("conv layer needs conv:OUT:KH:KW[:STRIDE[:PAD]]:ACT, got '" + item + "'");
            }
            if (current.size() != 3) throw std::invalid_argument("conv layer needs a CxHxW input");
            Conv2dShape c;
            c.out_channels = parse_size(tok[1], "out_channels");
            c.in_channels = current[0];
            c.kernel_h = parse_size(tok[2], "kernel_h");
            c.kernel_w = parse_size(tok[3], "kernel_w");
            if (tok.size() > 4) c.stride = parse_size(tok[4], "stride");
            if (tok.size() > 5) c.padding = parse_size(tok[5], "padding");
            layer.kind = c;
        } else {
            throw std::invalid_argument("unknown layer kind '" + tok[0] + "'");
        }
        const auto fan_in = static_cast<double>(layer.group_size());
        auto draw = [&] {
            return init == InitKind::UniformNonneg ? uniform01(rng) : standard_normal(rng) / std::sqrt(fan_in);
        };
        std::vector<double> w(shape_volume(layer.weight_shape()));
        for (auto& v : w) v = draw();
        layer.weights = Tensor(layer.weight_shape(), std::move(w));
        if (with_bias) {
            std::vector<double> b(layer.group_count());
            for (auto& v : b) v = draw();
            layer.bias = Tensor({layer.group_count()}, std::move(b));
        }
        layers.push_back(std::move(layer));
        // Validate incrementally so later conv layers see the real shape.
        current = Network(input_shape, layers).layer_output_shape(layers.size() - 1);
    }
    return Network(input_shape, std::move(layers));
}

Tensor gen_data(const Shape& sample_shape, InitKind dist, std::size_t count, std::uint64_t seed) {
    if (count == 0) throw std::invalid_argument("sample count must be positive");
    auto rng = seeded_engine(seed);
    Shape shape{count};
    shape.insert(shape.end(), sample_shape.begin(), sample_shape.end());
    std::vector<double> data(shape_volume(shape));
    for (auto& v : data) v = dist == InitKind::UniformNonneg ? uniform01(rng) : standard_normal(rng);
    return Tensor(std::move(shape), std::move(data));
}

std::size_t resolve_budget(std::optional<std::size_t> budget, std::optional<double> ratio, std::size_t total) {
    if (budget.has_value() == ratio.has_value()) {
        throw std::invalid_argument("give exactly one of a budget or a prune ratio");
    }
    if (budget) {
        if (*budget == 0) throw std::invalid_argument("budget must be positive");
        return std::min(*budget, total);
    }
    if (!(*ratio >= 0.0 && *ratio < 1.0)) throw std::invalid_argument("prune ratio must lie in [0, 1)");
    return static_cast<std::size_t>(std::llround((1.0 - *ratio) * static_cast<double>(total)));
}

SensitivityContext prepare_sensitivity(const Network& net, const Tensor& validation, BoundParams params,
                                       std::uint64_t seed, std::optional<std::size_t> sample_size) {
    const auto t0 = Clock::now();
    params.eta = net.total_patch_count();
    params.validate();
    if (validation.rank() < 2 || validation.trailing_shape() != net.input_shape()) {
        throw std::invalid_argument("validation data shape " + shape_to_string(validation.shape()) +
                                    " does not match model input " + shape_to_string(net.input_shape()));
    }

    SensitivityContext ctx;
    ctx.net = net;
    ctx.params = params;
    ctx.requested_sample_size =
        sample_size ? *sample_size : sample_set_size(params.eta, net.max_group_size(), params.delta, params.k);
    if (ctx.requested_sample_size == 0) throw std::invalid_argument("sample set size must be positive");
    const std::size_t rows = validation.shape()[0];
    if (rows < ctx.requested_sample_size) {
        ctx.flags.push_back("validation split has " + std::to_string(rows) + " points, fewer than the requested |S| = " +
                            std::to_string(ctx.requested_sample_size) + "; using all of them");
    }
    const auto picked = sample_without_replacement(rows, ctx.requested_sample_size, splitmix64(seed ^ kSampleStream));

    Shape shape = validation.shape();
    shape[0] = picked.size();
    std::vector<double> data;
    data.reserve(shape_volume(shape));
    for (auto r : picked) {
        auto row = validation.slice(r);
        data.insert(data.end(), row.begin(), row.end());
    }
    ctx.samples = Tensor(std::move(shape), std::move(data));
    ctx.trace = forward(net, ctx.samples);
    ctx.tables = network_sensitivities(net, ctx.trace);
    ctx.elapsed_ms = ms_since(t0);
    return ctx;
}

std::vector<std::vector<std::size_t>> magnitude_keep_sets(const Network& net, std::size_t budget) {
    struct Entry {
        double mag;
        std::size_t layer, group, index, slot;
    };
    std::vector<Entry> all;
    std::size_t slot = 0;
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
        for (std::size_t i = 0; i < net.group_count(l); ++i, ++slot) {
            auto w = net.group_weights(l, i);
            for (std::size_t j = 0; j < w.size(); ++j) all.push_back({std::abs(w[j]), l, i, j, slot});
        }
    }
    const auto keep = std::min(budget, all.size());
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep), all.end(),
                      [](const Entry& a, const Entry& b) {
                          if (a.mag != b.mag) return a.mag > b.mag;
                          return std::tie(a.layer, a.group, a.index) < std::tie(b.layer, b.group, b.index);
                      });
    std::vector<std::vector<std::size_t>> sets(slot);
    for (std::size_t r = 0; r < keep; ++r) sets[all[r].slot].push_back(all[r].index);
    for (auto& s : sets) std::sort(s.begin(), s.end());
    return sets;
}

AllocationPlan make_plan(const SensitivityContext& ctx, RunStrategy strategy, std::size_t budget, std::size_t floor,
                         std::vector<std::vector<std::size_t>>* kept_sets) {
    switch (strategy) {
        case RunStrategy::Det: return opt_alloc(ctx.tables, budget, Strategy::Det, ctx.params, {floor});
        case RunStrategy::Rand: return opt_alloc(ctx.tables, budget, Strategy::Rand, ctx.params, {floor});
        case RunStrategy::Hybrid: return opt_alloc(ctx.tables, budget, Strategy::Hybrid, ctx.params, {floor});
        case RunStrategy::Simple: return sipp_simple(ctx.tables, budget, ctx.params);
        case RunStrategy::Wt: {
            auto sets = magnitude_keep_sets(ctx.net, budget);
            AllocationPlan plan;
            plan.strategy = Strategy::Det;
            for (std::size_t g = 0; g < ctx.tables.size(); ++g) {
                const auto& t = ctx.tables[g];
                plan.groups.push_back({t.layer(), t.group(), sets[g].size(), det_certificate_for(t, sets[g], ctx.params.c)});
                plan.total += sets[g].size();
            }
            plan.objective = plan_objective(plan.groups);
            if (kept_sets) *kept_sets = std::move(sets);
            return plan;
        }
    }
    throw std::invalid_argument("unknown strategy");
}

PruneResult prune_with(const SensitivityContext& ctx, RunStrategy strategy, std::size_t budget, std::uint64_t seed,
                       std::size_t floor) {
    PruneResult res;
    res.budget = budget;
    res.total = ctx.net.prunable_count();

    auto t0 = Clock::now();
    std::vector<std::vector<std::size_t>> wt_sets;
    res.plan = make_plan(ctx, strategy, budget, floor, &wt_sets);
    res.allocation_ms = ms_since(t0);

    t0 = Clock::now();
    res.pruned = ctx.net;
    const Strategy kind = strategy == RunStrategy::Rand     ? Strategy::Rand
                          : strategy == RunStrategy::Hybrid ? Strategy::Hybrid
                                                            : Strategy::Det;
    for (std::size_t g = 0; g < ctx.tables.size(); ++g) {
        const auto& t = ctx.tables[g];
        const auto group = ctx.net.group(t.layer(), t.group());
        PrunedGroup pg;
        if (strategy == RunStrategy::Wt) {
            pg.kept = wt_sets[g];
            pg.weights.assign(group.weights.size(), 0.0);
            for (auto j : pg.kept) pg.weights[j] = group.weights[j];
            pg.unique_kept = pg.kept.size();
            pg.eps_det = res.plan.groups[g].error;
            pg.certificate = pg.eps_det;
            pg.eps_rand = std::numeric_limits<double>::infinity();
        } else {
            pg = sparsify(group, t, res.plan.groups[g].m, kind, derive_seed(seed, t.layer(), t.group()), ctx.params);
            res.plan.groups[g].error = pg.certificate;
        }
        res.pruned.set_group_weights(t.layer(), t.group(), pg.weights);
        res.groups.push_back(std::move(pg));
    }
    res.plan.objective = plan_objective(res.plan.groups);
    res.sparsify_ms = ms_since(t0);

    res.per_layer.resize(ctx.net.num_layers());
    for (std::size_t l = 0; l < ctx.net.num_layers(); ++l) {
        const auto w = res.pruned.layer(l).weights.data();
        res.per_layer[l].total = w.size();
        res.per_layer[l].kept = static_cast<std::size_t>(std::count_if(w.begin(), w.end(), [](double v) { return v != 0.0; }));
        res.kept += res.per_layer[l].kept;
    }

    t0 = Clock::now();
    res.certificate = network_certificate(ctx.net, res.plan, ctx.trace, ctx.params);
    res.certificate_ms = ms_since(t0);
    return res;
}

ErrorStats evaluate_errors(const Network& reference, const Network& pruned, const Tensor& test,
                           std::optional<double> eps) {
    const auto ref = predict(reference, test);
    const auto hat = predict(pruned, test);
    if (ref.shape() != hat.shape()) throw std::invalid_argument("reference and pruned outputs differ in shape");
    ErrorStats st;
    st.count = ref.shape()[0];
    for (std::size_t b = 0; b < st.count; ++b) {
        const auto f = ref.slice(b), g = hat.slice(b);
        double diff = 0.0, norm = 0.0;
        for (std::size_t k = 0; k < f.size(); ++k) {
            diff += (g[k] - f[k]) * (g[k] - f[k]);
            norm += f[k] * f[k];
        }
        diff = std::sqrt(diff);
        norm = std::sqrt(norm);
        st.errors.push_back(norm > 0.0 ? diff / norm : (diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity()));
    }
    auto sorted = st.errors;
    std::sort(sorted.begin(), sorted.end());
    double sum = 0.0;
    for (double e : st.errors) sum += e;
    st.mean = sum / static_cast<double>(st.count);
    st.max = sorted.back();
    auto quantile = [&](double q) {
        const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(st.count)));
        return sorted[std::min(st.count - 1, rank == 0 ? 0 : rank - 1)];
    };
    st.p50 = quantile(0.5);
    st.p90 = quantile(0.9);
    st.p99 = quantile(0.99);
    if (eps) {
        const auto hits = std::count_if(st.errors.begin(), st.errors.end(), [&](double e) { return e <= *eps; });
        st.coverage = static_cast<double>(hits) / static_cast<double>(st.count);
    }
    return st;
}

namespace {

json stats_json(const ErrorStats& s) {
    json j;
    j["count"] = s.count;
    j["mean"] = finite_or_null(s.mean);
    j["max"] = finite_or_null(s.max);
    j["p50"] = finite_or_null(s.p50);
    j["p90"] = finite_or_null(s.p90);
    j["p99"] = finite_or_null(s.p99);
    j["coverage"] = s.coverage ? json(*s.coverage) : json(nullptr);
    return j;
}

}  // namespace

std::string stats_to_json(const ErrorStats& stats) { return stats_json(stats).dump(2); }

std::string report_to_json(const RunReport& r) {
    json j;
    j["strategy"] = r.strategy;
    j["ratio"] = r.ratio ? json(*r.ratio) : json(nullptr);
    j["budget"] = r.budget;
    j["kept"] = r.kept;
    j["total"] = r.total;
    auto layers = json::array();
    for (const auto& l : r.per_layer) layers.push_back({{"kept", l.kept}, {"total", l.total}});
    j["per_layer"] = std::move(layers);
    j["certificate"] = json::parse(certificate_to_json(r.certificate));
    j["empirical"] = r.empirical ? stats_json(*r.empirical) : json(nullptr);
    j["sample_size"] = r.sample_size;
    j["requested_sample_size"] = r.requested_sample_size;
    j["flags"] = r.flags;
    j["timings_ms"] = {{"sensitivity", r.sensitivity_ms},
                       {"allocation", r.allocation_ms},
                       {"sparsify", r.sparsify_ms},
                       {"certificate", r.certificate_ms},
                       {"evaluation", r.eval_ms}};
    return j.dump(2);
}

std::string plan_csv(const AllocationPlan& plan) {
    std::string out = "layer,group,allocated_m,group_error\n";
    for (const auto& g : plan.groups) {
        out += std::to_string(g.layer) + ',' + std::to_string(g.group) + ',' + std::to_string(g.m) + ',' + num(g.error) + '\n';
    }
    return out;
}

std::string sensitivity_csv(const std::vector<SensitivityTable>& tables) {
    std::string out = "layer,group,weight_index,sensitivity\n";
    for (const auto& t : tables) {
        for (std::size_t j = 0; j < t.size(); ++j) {
            out += std::to_string(t.layer()) + ',' + std::to_string(t.group()) + ',' + std::to_string(j) + ',' + num(t[j]) + '\n';
        }
    }
    return out;
}

RunReport prune_run(const RunConfig& cfg) {
    const auto net = load_model(cfg.model);
    const auto validation = read_tensor_file(cfg.data);
    const auto budget = resolve_budget(cfg.budget, cfg.ratio, net.prunable_count());
    const auto ctx = prepare_sensitivity(net, validation, cfg.params, cfg.seed, cfg.sample_size);
    auto res = prune_with(ctx, cfg.strategy, budget, cfg.seed, cfg.floor);

    RunReport rep;
    rep.strategy = to_string(cfg.strategy);
    rep.ratio = cfg.ratio;
    rep.budget = budget;
    rep.kept = res.kept;
    rep.total = res.total;
    rep.per_layer = res.per_layer;
    rep.certificate = res.certificate;
    rep.sample_size = ctx.samples.shape()[0];
    rep.requested_sample_size = ctx.requested_sample_size;
    rep.flags = ctx.flags;
    rep.sensitivity_ms = ctx.elapsed_ms;
    rep.allocation_ms = res.allocation_ms;
    rep.sparsify_ms = res.sparsify_ms;
    rep.certificate_ms = res.certificate_ms;
    if (!cfg.test_data.empty()) {
        const auto t0 = Clock::now();
        const auto test = read_tensor_file(cfg.test_data);
        rep.empirical = evaluate_errors(net, res.pruned, test, res.certificate.network_eps);
        rep.eval_ms = ms_since(t0);
    }

    if (!cfg.out.empty()) {
        fs::create_directories(cfg.out);
        save_model(cfg.out, res.pruned);
        write_text(cfg.out / "report.json", report_to_json(rep) + "\n");
        write_text(cfg.out / "certificate.json", certificate_to_json(res.certificate) + "\n");
        write_text(cfg.out / "plan.csv", plan_csv(res.plan));
        if (cfg.export_sensitivity) write_text(cfg.out / "sensitivity.csv", sensitivity_csv(ctx.tables));
    }
    return rep;
}

std::vector<SweepRow> sweep(const SensitivityContext& ctx, const Tensor& test, const std::vector<double>& ratios,
                            const std::vector<RunStrategy>& strategies, std::uint64_t seed, std::size_t floor) {
    std::vector<SweepRow> rows;
    for (auto strategy : strategies) {
        for (double r : ratios) {
            const auto budget = resolve_budget(std::nullopt, r, ctx.net.prunable_count());
            const auto res = prune_with(ctx, strategy, budget, seed, floor);
            const auto st = evaluate_errors(ctx.net, res.pruned, test, res.certificate.network_eps);
            rows.push_back({r, to_string(strategy), budget, res.kept, res.total, res.certificate.network_eps, st.mean,
                            st.max, *st.coverage});
        }
    }
    return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::string out = "ratio,strategy,budget,kept,total,certificate_eps,emp_mean_rel_err,emp_max_rel_err,coverage\n";
    for (const auto& r : rows) {
        out += num(r.ratio) + ',' + r.strategy + ',' + std::to_string(r.budget) + ',' + std::to_string(r.kept) + ',' +
               std::to_string(r.total) + ',' + num(r.certificate_eps) + ',' + num(r.mean_rel_err) + ',' +
               num(r.max_rel_err) + ',' + num(r.coverage) + '\n';
    }
    return out;
}

}  // namespace sipp
