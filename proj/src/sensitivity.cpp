#include "sipp/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "sipp/random.hpp"

namespace sipp {

void BoundParams::validate() const {
    if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0, 1)");
    if (!(c > 0.0) || !std::isfinite(c)) throw std::invalid_argument("C must be positive");
    if (!(k > 0.0) || !std::isfinite(k)) throw std::invalid_argument("K must be positive");
    if (eta == 0) throw std::invalid_argument("eta must be positive");
}

namespace {

inline double part(double v, bool plus) {
    if (plus) return v > 0.0 ? v : 0.0;
    return v < 0.0 ? -v : 0.0;
}

inline bool weight_plus(Quadrant q) { return q == Quadrant::PlusPlus || q == Quadrant::PlusMinus; }
inline bool input_plus(Quadrant q) { return q == Quadrant::PlusPlus || q == Quadrant::MinusPlus; }

// Fold the quadrant ratios of one patch into `running_max`; `scratch` has
// the group size.
void fold_patch(std::span<const double> w, std::span<const double> a, std::span<double> running_max,
                std::vector<double>& scratch) {
    for (auto q : kQuadrants) {
        const bool wp = weight_plus(q), ap = input_plus(q);
        double denom = 0.0;
        for (std::size_t j = 0; j < w.size(); ++j) {
            scratch[j] = part(w[j], wp) * part(a[j], ap);
            denom += scratch[j];
        }
        if (denom <= 0.0) continue;
        for (std::size_t j = 0; j < w.size(); ++j) {
            const double r = scratch[j] / denom;
            if (r > running_max[j]) running_max[j] = r;
        }
    }
}

}  // namespace

std::vector<double> quadrant_ratios(std::span<const double> w, std::span<const double> a, Quadrant q) {
    if (w.size() != a.size()) throw std::invalid_argument("patch length must equal group size");
    std::vector<double> r(w.size(), 0.0);
    double denom = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) {
        r[j] = part(w[j], weight_plus(q)) * part(a[j], input_plus(q));
        denom += r[j];
    }
    if (denom <= 0.0) {
        std::fill(r.begin(), r.end(), 0.0);
        return r;
    }
    for (auto& v : r) v /= denom;
    return r;
}

void accumulate_importance(std::span<const double> weights, const PatchMatrix& patches,
                           std::span<double> running_max) {
    if (patches.cols != weights.size() || running_max.size() != weights.size()) {
        throw std::invalid_argument("patch width must equal group size");
    }
    std::vector<double> scratch(weights.size());
    for (std::size_t p = 0; p < patches.rows; ++p) fold_patch(weights, patches.row(p), running_max, scratch);
}

std::vector<double> relative_importance(std::span<const double> weights, const PatchMatrix& patches) {
    std::vector<double> g(weights.size(), 0.0);
    accumulate_importance(weights, patches, g);
    return g;
}

SensitivityTable::SensitivityTable(std::size_t layer, std::size_t group, std::vector<double> s,
                                   std::span<const double> weights)
    : layer_(layer), group_(group), s_(std::move(s)) {
    if (s_.empty()) throw std::invalid_argument("sensitivity table needs at least one weight");
    if (weights.size() != s_.size()) throw std::invalid_argument("weights and sensitivities differ in length");
    for (double v : s_) {
        if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("sensitivities must lie in [0, 1]");
    }
    mag_.resize(s_.size());
    for (std::size_t j = 0; j < s_.size(); ++j) mag_[j] = std::abs(weights[j]);

    order_.resize(s_.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    std::sort(order_.begin(), order_.end(), [this](std::size_t a, std::size_t b) {
        if (s_[a] != s_[b]) return s_[a] > s_[b];
        if (mag_[a] != mag_[b]) return mag_[a] > mag_[b];
        return a < b;
    });

    const auto n = s_.size();
    prefix_.assign(n + 1, 0.0);
    suffix_.assign(n + 1, 0.0);
    for (std::size_t r = 0; r < n; ++r) prefix_[r + 1] = prefix_[r] + s_[order_[r]];
    for (std::size_t r = n; r-- > 0;) suffix_[r] = suffix_[r + 1] + s_[order_[r]];
    positive_ = static_cast<std::size_t>(std::count_if(s_.begin(), s_.end(), [](double v) { return v > 0.0; }));
}

SensitivityTable empirical_sensitivity(const ParameterGroup& group, std::span<const PatchMatrix> per_input) {
    if (per_input.empty()) throw std::invalid_argument("empirical sensitivity needs a nonempty sample set");
    std::vector<double> s(group.weights.size(), 0.0);
    for (const auto& pm : per_input) accumulate_importance(group.weights, pm, s);
    return SensitivityTable(group.layer, group.index, std::move(s), group.weights);
}

std::vector<SensitivityTable> network_sensitivities(const Network& net, const ForwardTrace& trace) {
    const std::size_t n = trace.batch_size();
    if (n == 0) throw std::invalid_argument("empirical sensitivity needs a nonempty sample set");
    if (trace.post.size() != net.num_layers() + 1) throw std::invalid_argument("trace does not match network");

    std::vector<SensitivityTable> tables;
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
        const std::size_t groups = net.group_count(l), gs = net.group_size(l);
        std::vector<double> s(groups * gs, 0.0);
        std::vector<double> scratch(gs);
        for (std::size_t b = 0; b < n; ++b) {
            const auto pm = extract_patches(net, l, trace.post[l].slice(b));
            for (std::size_t i = 0; i < groups; ++i) {
                auto w = net.group_weights(l, i);
                auto row = std::span<double>(s).subspan(i * gs, gs);
                for (std::size_t p = 0; p < pm.rows; ++p) fold_patch(w, pm.row(p), row, scratch);
            }
        }
        for (std::size_t i = 0; i < groups; ++i) {
            tables.emplace_back(l, i, std::vector<double>(s.begin() + i * gs, s.begin() + (i + 1) * gs),
                                net.group_weights(l, i));
        }
    }
    return tables;
}

std::size_t sample_set_size(std::size_t eta, std::size_t rho, double delta, double k) {
    if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0, 1)");
    if (eta == 0 || rho == 0 || !(k > 0.0)) throw std::invalid_argument("eta, rho and K must be positive");
    const double n = k * std::log(8.0 * static_cast<double>(eta) * static_cast<double>(rho) / delta);
    return static_cast<std::size_t>(std::max(1.0, std::ceil(n)));
}

std::vector<std::size_t> sample_without_replacement(std::size_t population, std::size_t count, std::uint64_t seed) {
    std::vector<std::size_t> idx(population);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    count = std::min(count, population);
    auto rng = seeded_engine(seed);
    for (std::size_t i = 0; i < count; ++i) {
        const auto j = i + static_cast<std::size_t>(uniform_below(rng, population - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(count);
    return idx;
}

}  // namespace sipp
