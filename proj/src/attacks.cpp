#include "gradid/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "gradid/errors.hpp"
#include "gradid/rng.hpp"

namespace gradid {

namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

double clip01(double v) { return std::min(1.0, std::max(0.0, v)); }

int argmax(std::span<const double> v) {
    return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

AdversarialExample finish(const LabeledSample& s, const Network& net, std::vector<double> x_adv,
                          unsigned iterations) {
    AdversarialExample out{Tensor(s.input.shape(), std::move(x_adv)), 0.0, 0.0, false, iterations};
    out.delta_linf = linf_distance(out.x_adv.data(), s.input.data());
    out.delta_l2 = l2_distance(out.x_adv.data(), s.input.data());
    out.fooled = argmax(forward(net, out.x_adv)) != s.label;
    return out;
}

void require_kind(const AttackConfig& cfg, AttackKind kind, const char* name) {
    cfg.validate();
    if (cfg.kind != kind) {
        throw ParameterError(std::string("config kind does not match ") + name);
    }
}

// Shared PGD/BIM loop; projection is a componentwise clamp onto the eps-box
// around the source followed by [0, 1].
AdversarialExample iterated_fgsm(const Network& net, const LabeledSample& s, const AttackConfig& cfg,
                                 bool random_start) {
    const std::span<const double> x0 = s.input.data();
    std::vector<double> x(x0.begin(), x0.end());

    if (random_start && cfg.epsilon > 0.0) {
        Rng rng(cfg.seed);
        for (std::size_t i = 0; i < x.size(); ++i) {
            x[i] = clip01(x[i] + rng.uniform(-cfg.epsilon, cfg.epsilon));
        }
    }

    for (unsigned t = 0; t < cfg.steps; ++t) {
        const Tensor grad = input_gradient(net, LabeledSample(Tensor(s.input.shape(), x), s.label));
        for (std::size_t i = 0; i < x.size(); ++i) {
            double v = x[i] + cfg.alpha * sign(grad[i]);
            v = std::min(x0[i] + cfg.epsilon, std::max(x0[i] - cfg.epsilon, v));
            x[i] = clip01(v);
        }
    }
    return finish(s, net, std::move(x), cfg.steps);
}

}  // namespace

std::string attack_kind_name(AttackKind kind) {
    switch (kind) {
        case AttackKind::fgsm: return "fgsm";
        case AttackKind::pgd: return "pgd";
        case AttackKind::bim: return "bim";
        case AttackKind::deepfool: return "deepfool";
        case AttackKind::cw_l2: return "cw";
    }
    return "fgsm";
}

AttackKind attack_kind_from(const std::string& name) {
    if (name == "fgsm") return AttackKind::fgsm;
    if (name == "pgd") return AttackKind::pgd;
    if (name == "bim") return AttackKind::bim;
    if (name == "deepfool") return AttackKind::deepfool;
    if (name == "cw" || name == "cw_l2") return AttackKind::cw_l2;
    throw ConfigError("unknown attack kind \"" + name + "\"");
}

void AttackConfig::validate() const {
    if (epsilon < 0.0) throw ParameterError("epsilon must be non-negative");
    if (steps < 1) throw ParameterError("steps must be at least 1");
    if ((kind == AttackKind::pgd || kind == AttackKind::bim) && !(alpha > 0.0)) {
        throw ParameterError("alpha must be positive for pgd/bim");
    }
    if (kind == AttackKind::cw_l2) {
        if (c < 0.0) throw ParameterError("CW constant c must be non-negative");
        if (kappa < 0.0) throw ParameterError("CW margin kappa must be non-negative");
        if (!(lr > 0.0)) throw ParameterError("CW learning rate must be positive");
    }
}

AdversarialExample fgsm(const Network& net, const LabeledSample& s, const AttackConfig& cfg) {
    require_kind(cfg, AttackKind::fgsm, "fgsm");
    const Tensor grad = input_gradient(net, s);
    std::vector<double> x(s.input.data().begin(), s.input.data().end());
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = clip01(x[i] + cfg.epsilon * sign(grad[i]));
    }
    return finish(s, net, std::move(x), 1);
}

AdversarialExample pgd(const Network& net, const LabeledSample& s, const AttackConfig& cfg) {
    require_kind(cfg, AttackKind::pgd, "pgd");
    return iterated_fgsm(net, s, cfg, cfg.random_start);
}

AdversarialExample bim(const Network& net, const LabeledSample& s, const AttackConfig& cfg) {
    require_kind(cfg, AttackKind::bim, "bim");
    return iterated_fgsm(net, s, cfg, false);
}

AdversarialExample deepfool(const Network& net, const LabeledSample& s, const AttackConfig& cfg) {
    require_kind(cfg, AttackKind::deepfool, "deepfool");
    constexpr double kOvershoot = 1.02;
    const std::span<const double> x0 = s.input.data();
    const std::size_t dim = x0.size();
    const std::size_t classes = net.num_classes();
    const auto y = static_cast<std::size_t>(s.label);

    std::vector<double> x(x0.begin(), x0.end());
    std::vector<double> total(dim, 0.0);

    if (argmax(forward(net, s.input)) != s.label) {
        // Nothing to do; the sample is already past the boundary.
        return finish(s, net, std::move(x), 0);
    }

    unsigned used = cfg.steps;
    bool degenerate = false;
    for (unsigned t = 0; t < cfg.steps; ++t) {
        // Both the flip check and the next linearization happen at the
        // overshot iterate x0 + 1.02 * total, so a step that lands exactly
        // on the hyperplane still crosses it.
        for (std::size_t i = 0; i < dim; ++i) x[i] = x0[i] + kOvershoot * total[i];
        const Tensor xt(s.input.shape(), x);
        const std::vector<double> logits = forward(net, xt);
        if (static_cast<std::size_t>(argmax(logits)) != y) {
            used = t;
            break;
        }
        const auto jac = logit_jacobian(net, xt);

        double best_ratio = std::numeric_limits<double>::infinity();
        std::size_t best = classes;
        double best_gap = 0.0, best_norm2 = 0.0;
        for (std::size_t l = 0; l < classes; ++l) {
            if (l == y) continue;
            double norm2 = 0.0;
            for (std::size_t i = 0; i < dim; ++i) {
                const double w = jac[l][i] - jac[y][i];
                norm2 += w * w;
            }
            if (norm2 <= 0.0) continue;  // parallel hyperplane, no direction
            const double gap = logits[l] - logits[y];
            const double ratio = std::fabs(gap) / std::sqrt(norm2);
            if (ratio < best_ratio) {
                best_ratio = ratio;
                best = l;
                best_gap = gap;
                best_norm2 = norm2;
            }
        }
        if (best == classes) {
            degenerate = true;
            used = t;
            break;
        }
        const double scale = std::fabs(best_gap) / best_norm2;
        for (std::size_t i = 0; i < dim; ++i) {
            total[i] += scale * (jac[best][i] - jac[y][i]);
        }
        used = t + 1;
    }

    std::vector<double> x_final(dim);
    for (std::size_t i = 0; i < dim; ++i) {
        x_final[i] = clip01(x0[i] + kOvershoot * total[i]);
    }
    AdversarialExample out = finish(s, net, std::move(x_final), used);
    if (degenerate) out.fooled = false;
    return out;
}

AdversarialExample cw_l2(const Network& net, const LabeledSample& s, const AttackConfig& cfg) {
    require_kind(cfg, AttackKind::cw_l2, "cw_l2");
    const std::span<const double> x0 = s.input.data();
    const std::size_t dim = x0.size();
    const std::size_t classes = net.num_classes();
    const auto y = static_cast<std::size_t>(s.label);

    // w = atanh(2x - 1) with inputs pre-clamped away from the open-interval
    // endpoints.
    std::vector<double> w(dim);
    for (std::size_t i = 0; i < dim; ++i) {
        const double xc = std::min(1.0 - 1e-6, std::max(1e-6, x0[i]));
        w[i] = std::atanh(2.0 * xc - 1.0);
    }

    std::vector<double> x_adv(dim);
    std::vector<double> best_x;
    double best_l2 = std::numeric_limits<double>::infinity();
    unsigned best_iter = 0;

    std::vector<double> seed(classes, 0.0);
    for (unsigned t = 1; t <= cfg.steps; ++t) {
        double l2 = 0.0;
        for (std::size_t i = 0; i < dim; ++i) {
            x_adv[i] = 0.5 * (std::tanh(w[i]) + 1.0);
            const double d = x_adv[i] - x0[i];
            l2 += d * d;
        }
        l2 = std::sqrt(l2);

        const std::vector<double> logits = forward(net, std::span<const double>(x_adv));
        std::size_t runner_up = y == 0 ? 1 : 0;
        for (std::size_t l = 0; l < classes; ++l) {
            if (l != y && logits[l] > logits[runner_up]) runner_up = l;
        }
        const double hinge = logits[y] - logits[runner_up] + cfg.kappa;

        if (hinge <= 0.0 && l2 < best_l2) {
            best_l2 = l2;
            best_x = x_adv;
            best_iter = t;
        }

        // d(objective)/dx = 2 (x_adv - x0) + c * d(hinge)/dx when active.
        std::vector<double> dx(dim);
        for (std::size_t i = 0; i < dim; ++i) dx[i] = 2.0 * (x_adv[i] - x0[i]);
        if (hinge > 0.0 && cfg.c > 0.0) {
            std::fill(seed.begin(), seed.end(), 0.0);
            seed[y] = cfg.c;
            seed[runner_up] = -cfg.c;
            const std::vector<double> hinge_grad =
                input_gradient_seeded(net, std::span<const double>(x_adv), seed);
            for (std::size_t i = 0; i < dim; ++i) dx[i] += hinge_grad[i];
        }
        for (std::size_t i = 0; i < dim; ++i) {
            const double th = std::tanh(w[i]);
            w[i] -= cfg.lr * dx[i] * 0.5 * (1.0 - th * th);
        }
    }

    if (!best_x.empty()) {
        AdversarialExample out = finish(s, net, std::move(best_x), best_iter);
        out.fooled = true;  // margin met at the selected iterate
        return out;
    }
    for (std::size_t i = 0; i < dim; ++i) x_adv[i] = 0.5 * (std::tanh(w[i]) + 1.0);
    AdversarialExample out = finish(s, net, std::move(x_adv), cfg.steps);
    out.fooled = false;  // no iterate met the margin
    return out;
}

AdversarialExample run_attack(const Network& net, const LabeledSample& s, const AttackConfig& cfg) {
    switch (cfg.kind) {
        case AttackKind::fgsm: return fgsm(net, s, cfg);
        case AttackKind::pgd: return pgd(net, s, cfg);
        case AttackKind::bim: return bim(net, s, cfg);
        case AttackKind::deepfool: return deepfool(net, s, cfg);
        case AttackKind::cw_l2: return cw_l2(net, s, cfg);
    }
    throw ParameterError("unknown attack kind");
}

}  // namespace gradid
