#include "sipp/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "json.hpp"

namespace sipp {

std::vector<double> linear_preactivation(const Network& net, std::size_t l, const ForwardTrace& trace, std::size_t b) {
    return apply_linear(net, l, net.layer(l).weights.data(), trace.post.at(l).slice(b));
}

std::vector<std::vector<double>> quadrant_preactivations(const Network& net, std::size_t l, const ForwardTrace& trace,
                                                        std::size_t b) {
    const auto w = quadrant_split(net.layer(l).weights.data());
    const auto a = quadrant_split(trace.post.at(l).slice(b));
    return {apply_linear(net, l, w.plus, a.plus), apply_linear(net, l, w.plus, a.minus),
            apply_linear(net, l, w.minus, a.plus), apply_linear(net, l, w.minus, a.minus)};
}

SampleMax sign_complexity(const Network& net, std::size_t l, const ForwardTrace& trace) {
    SampleMax out;
    for (std::size_t b = 0; b < trace.batch_size(); ++b) {
        const double nz = frobenius_norm(linear_preactivation(net, l, trace, b));
        if (!(nz > 0.0)) {
            ++out.skipped;
            continue;
        }
        double num = 0.0;
        for (const auto& zq : quadrant_preactivations(net, l, trace, b)) num += frobenius_norm(zq);
        const double r = num / nz;
        out.value = out.defined ? std::max(out.value, r) : r;
        out.defined = true;
    }
    return out;
}

double downstream_frobenius(const Network& net, std::size_t l) {
    double p = 1.0;
    for (std::size_t k = l + 1; k < net.num_layers(); ++k) p *= frobenius_norm(net.layer(k).weights);
    return p;
}

SampleMax layer_condition(const Network& net, std::size_t l, const ForwardTrace& trace) {
    SampleMax out;
    const double prod = downstream_frobenius(net, l);
    for (std::size_t b = 0; b < trace.batch_size(); ++b) {
        const double na = frobenius_norm(trace.output().slice(b));
        if (!(na > 0.0)) {
            ++out.skipped;
            continue;
        }
        const double r = prod * frobenius_norm(linear_preactivation(net, l, trace, b)) / na;
        out.value = out.defined ? std::max(out.value, r) : r;
        out.defined = true;
    }
    return out;
}

double layer_certificate(const AllocationPlan& plan, std::size_t l) {
    double eps = 0.0;
    for (const auto& g : plan.groups) {
        if (g.layer == l) eps = std::max(eps, g.error);
    }
    return eps;
}

std::vector<double> propagation_by_layer(const Network& net, const std::vector<double>& layer_eps,
                                         const std::vector<double>& layer_delta, const ForwardTrace& trace,
                                         std::size_t b) {
    std::vector<double> bound(net.num_layers(), 0.0);
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
        const double carried = l == 0 ? 0.0 : frobenius_norm(net.layer(l).weights) * bound[l - 1];
        const double fresh =
            layer_eps[l] == 0.0 ? 0.0
                                : layer_eps[l] * layer_delta[l] * frobenius_norm(linear_preactivation(net, l, trace, b));
        bound[l] = carried + fresh;
    }
    return bound;
}

PruneCertificate network_certificate(const Network& net, const AllocationPlan& plan, const ForwardTrace& trace,
                                     const BoundParams& params) {
    PruneCertificate cert;
    cert.delta = params.delta;
    cert.c = params.c;
    cert.k = params.k;
    cert.sample_size = trace.batch_size();
    cert.strategy = plan.strategy;
    cert.composition = plan.strategy == Strategy::Det ? "direct" : "analogous composition";

    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> eps(net.num_layers()), delta(net.num_layers());
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
        LayerCertificate lc;
        lc.eps = layer_certificate(plan, l);
        lc.delta = sign_complexity(net, l, trace);
        lc.kappa = layer_condition(net, l, trace);
        const auto tag = "layer " + std::to_string(l) + ": ";
        if (lc.delta.skipped) {
            cert.flags.push_back(tag + std::to_string(lc.delta.skipped) + " sample point(s) with zero pre-activation skipped");
        }
        if (lc.kappa.skipped) {
            cert.flags.push_back(tag + std::to_string(lc.kappa.skipped) + " sample point(s) with zero output skipped");
        }
        if (lc.eps == 0.0) {
            lc.term = 0.0;
        } else if (!lc.delta.defined || !lc.kappa.defined) {
            lc.term = inf;
            cert.defined = false;
            cert.flags.push_back(tag + "sign complexity or condition number undefined on the sample set");
        } else {
            lc.term = lc.kappa.value * lc.delta.value * lc.eps;
        }
        eps[l] = lc.eps;
        delta[l] = lc.delta.defined ? lc.delta.value : inf;
        cert.network_eps += lc.term;
        cert.layers.push_back(lc);
    }

    for (std::size_t b = 0; b < trace.batch_size(); ++b) {
        const double bound = propagation_by_layer(net, eps, delta, trace, b).back();
        const double na = frobenius_norm(trace.output().slice(b));
        cert.propagation_bound.push_back(bound);
        cert.propagation_relative.push_back(na > 0.0 ? bound / na : inf);
    }
    return cert;
}

namespace {

nlohmann::json finite_or_null(double v) {
    if (std::isfinite(v)) return v;
    return nullptr;
}

}  // namespace

std::string certificate_to_json(const PruneCertificate& cert) {
    nlohmann::json j;
    j["delta"] = cert.delta;
    j["C"] = cert.c;
    j["K"] = cert.k;
    j["sample_size"] = cert.sample_size;
    j["strategy"] = to_string(cert.strategy);
    j["composition"] = cert.composition;
    auto layers = nlohmann::json::array();
    for (const auto& l : cert.layers) {
        layers.push_back({{"eps", l.eps},
                          {"Delta", l.delta.defined ? nlohmann::json(l.delta.value) : nlohmann::json(nullptr)},
                          {"kappa", l.kappa.defined ? nlohmann::json(l.kappa.value) : nlohmann::json(nullptr)},
                          {"Delta_skipped", l.delta.skipped},
                          {"kappa_skipped", l.kappa.skipped},
                          {"term", finite_or_null(l.term)}});
    }
    j["per_layer"] = std::move(layers);
    j["network_eps"] = finite_or_null(cert.network_eps);
    j["defined"] = cert.defined;
    j["flags"] = cert.flags;
    return j.dump(2);
}

}  // namespace sipp
