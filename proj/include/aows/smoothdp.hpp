#pragma once

#include <cstddef>
#include <vector>

#include "aows/ows.hpp"
#include "aows/rng.hpp"

namespace aows {

/// Per-boundary marginal distributions, stored as log-probabilities.
struct MarginalSet {
    std::vector<std::vector<double>> log_probs;

    std::size_t num_boundaries() const noexcept { return log_probs.size(); }
    std::vector<double> probabilities(std::size_t boundary) const;
    double max_probability(std::size_t boundary) const;
    /// Shannon entropy (nats) of one boundary's marginal.
    double entropy(std::size_t boundary) const;
};

/// Smoothed min-sum forward-backward with m = -T log sum exp(-(.)/T).
/// At T = 1 the marginals are those of the CRF p(c) ∝ exp(-E(c)).
MarginalSet forward_backward(const ChainEnergy& energy, double temperature);

/// Same marginals along with the backward messages, for joint sampling.
struct SmoothedChain {
    MarginalSet marginals;
    std::vector<std::vector<double>> forward;
    std::vector<std::vector<double>> backward;
    double log_partition = 0.0;  // -F/T where F is the smoothed minimum
};
SmoothedChain smooth_chain(const ChainEnergy& energy, double temperature);

/// Independent draw at each boundary from its marginal.
ChoicePath sample(const MarginalSet& marginals, Rng& rng);

/// Draw from the exact chain distribution p(c) ∝ exp(-E(c)/T) by forward
/// sampling against the backward messages.
ChoicePath sample_joint(const ChainEnergy& energy, const SmoothedChain& chain, double temperature,
                        Rng& rng);

/// Piecewise-exponential temperature schedule through (epoch, temperature) knots.
class AnnealSchedule {
public:
    struct Knot {
        double epoch;
        double temperature;
    };

    explicit AnnealSchedule(std::vector<Knot> knots);

    /// 1 at epoch 5, 1e-2 at 6, 1e-3 at 10, 5e-4 at 20.
    static AnnealSchedule standard();

    const std::vector<Knot>& knots() const noexcept { return knots_; }
    double start() const noexcept { return knots_.front().epoch; }
    /// Same temperatures with every knot moved by `offset` epochs.
    AnnealSchedule shifted(double offset) const;

private:
    std::vector<Knot> knots_;
};

/// Throws ValidationError for epochs before the first knot; clamps after the last.
double temperature_at(const AnnealSchedule& schedule, double epoch);

}  // namespace aows
