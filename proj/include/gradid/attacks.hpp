#pragma once

#include <cstdint>
#include <string>

#include "gradid/network.hpp"
#include "gradid/tensor.hpp"

namespace gradid {

enum class AttackKind { fgsm, pgd, bim, deepfool, cw_l2 };

std::string attack_kind_name(AttackKind kind);
AttackKind attack_kind_from(const std::string& name);

// Per-attack parameter record. Fields irrelevant to a kind are ignored but
// stored. Inputs live in [0, 1]; every attack clips componentwise.
struct AttackConfig {
    AttackKind kind = AttackKind::fgsm;
    double epsilon = 0.0;     // L-inf budget, input units
    double alpha = 0.0;       // per-step size (pgd/bim)
    unsigned steps = 1;
    double c = 2.0;           // CW trade-off constant
    double kappa = 2.0;       // CW confidence margin
    double lr = 0.01;         // CW optimizer step size
    std::uint64_t seed = 0;   // PGD random start
    bool random_start = true; // PGD only; BIM is PGD without it

    void validate() const;
};

struct AdversarialExample {
    Tensor x_adv;
    double delta_linf = 0.0;  // recomputed from x_adv, never trusted
    double delta_l2 = 0.0;
    bool fooled = false;      // model prediction differs from the true label
    unsigned iterations_used = 0;
};

// x + eps * sign(dL/dx), one gradient evaluation.
AdversarialExample fgsm(const Network& net, const LabeledSample& s, const AttackConfig& cfg);

// Seeded uniform start in the eps-ball, then `steps` signed-gradient ascents,
// each projected onto the eps-ball intersected with [0, 1].
AdversarialExample pgd(const Network& net, const LabeledSample& s, const AttackConfig& cfg);

// PGD without the random start; iterates are deterministic.
AdversarialExample bim(const Network& net, const LabeledSample& s, const AttackConfig& cfg);

// Iterative minimal-perturbation attack via the logit Jacobian; overshoot
// 1.02 applied to the accumulated perturbation, then clipped to [0, 1].
AdversarialExample deepfool(const Network& net, const LabeledSample& s, const AttackConfig& cfg);

// Carlini-Wagner L2 under the tanh reparameterization, plain gradient
// descent; returns the closest iterate meeting the kappa margin, else the
// final iterate with fooled = false.
AdversarialExample cw_l2(const Network& net, const LabeledSample& s, const AttackConfig& cfg);

// Dispatch on cfg.kind.
AdversarialExample run_attack(const Network& net, const LabeledSample& s, const AttackConfig& cfg);

}  // namespace gradid
