#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "sipp/allocate.hpp"
#include "sipp/network.hpp"
#include "sipp/sensitivity.hpp"

namespace sipp {

// All pre-activations here are the bias-free linear part W * A, the quantity
// the sign-quadrant decomposition and the propagation argument are about.

/// Maximum over a sample set of a per-point ratio; points with a zero
/// denominator are skipped and counted.
struct SampleMax {
    double value = 0.0;
    std::size_t skipped = 0;
    bool defined = false;
};

/// Linear pre-activation of layer l for sample b of the trace.
std::vector<double> linear_preactivation(const Network& net, std::size_t l, const ForwardTrace& trace, std::size_t b);

/// The four sign-quadrant pre-activations (++, +-, -+, --) of layer l for
/// sample b, each computed from nonnegative weight and input parts.
std::vector<std::vector<double>> quadrant_preactivations(const Network& net, std::size_t l, const ForwardTrace& trace,
                                                        std::size_t b);

/// Delta^l = max_x (sum of quadrant norms) / ||Z^l(x)||.
SampleMax sign_complexity(const Network& net, std::size_t l, const ForwardTrace& trace);

/// prod_{k > l} ||W^k||_F, empty product = 1.
double downstream_frobenius(const Network& net, std::size_t l);

/// kappa^l = max_x prod_{k>l} ||W^k||_F * ||Z^l(x)|| / ||A^L(x)||.
SampleMax layer_condition(const Network& net, std::size_t l, const ForwardTrace& trace);

/// eps^l = max over the plan's groups in layer l of their certificates.
double layer_certificate(const AllocationPlan& plan, std::size_t l);

struct LayerCertificate {
    double eps = 0.0;
    SampleMax delta;  // sign complexity
    SampleMax kappa;  // layer condition number
    double term = 0.0;  // kappa * Delta * eps
};

struct PruneCertificate {
    std::vector<LayerCertificate> layers;
    double network_eps = 0.0;
    bool defined = true;
    double delta = 0.0;
    double c = 0.0;
    double k = 0.0;
    std::size_t sample_size = 0;
    Strategy strategy = Strategy::Det;
    /// "direct" for the deterministic path, "analogous composition" when
    /// sampled per-group certificates are substituted into the same sum.
    std::string composition;
    std::vector<std::string> flags;
    /// Per sample point: sum_l (prod_{k>l} ||W^k||_F) eps^l Delta^l ||Z^l(x)||,
    /// i.e. the propagated output-error bound, and its ratio to ||A^L(x)||.
    std::vector<double> propagation_bound;
    std::vector<double> propagation_relative;
};

/// Propagated bound after each layer for one sample: entry l is the bound on
/// ||A_hat^l(x) - A^l(x)||.
std::vector<double> propagation_by_layer(const Network& net, const std::vector<double>& layer_eps,
                                         const std::vector<double>& layer_delta, const ForwardTrace& trace,
                                         std::size_t b);

PruneCertificate network_certificate(const Network& net, const AllocationPlan& plan, const ForwardTrace& sample_trace,
                                     const BoundParams& params);

std::string certificate_to_json(const PruneCertificate& cert);

}  // namespace sipp
