#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "cpbigan/diff/params.hpp"
#include "cpbigan/diff/tape.hpp"
#include "cpbigan/rng.hpp"

namespace cpbigan::diff {

struct GradCheckEntry {
    std::string tensor;
    std::size_t index = 0;
    double analytic = 0;
    double numeric = 0;
    double rel_error = 0;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> worst; // sorted, largest error first
    std::size_t checked = 0;
    std::size_t failures = 0;
    double max_rel_error = 0;
    bool passed() const { return failures == 0; }
};

struct GradCheckOptions {
    double tol = 1e-3;
    double step = 1e-3;
    /// Denominator floor: tiny gradients are compared absolutely.
    double floor = 1e-4;
    std::size_t samples_per_tensor = 12;
    std::size_t report_worst = 8;
    std::uint64_t seed = 0;
};

/// Builds a scalar loss on a fresh tape from parameters bound out of the given sets.
using LossBuilder = std::function<Var(Tape<double>&, std::vector<ParamSet<double>*>&)>;

/// Central finite differences against reverse-mode gradients, fully in double.
inline GradCheckReport grad_check(const LossBuilder& loss, std::vector<ParamSet<double>*> params,
                                  const GradCheckOptions& opt = {}) {
    Tape<double> tape;
    Var l = loss(tape, params);
    tape.backward(l);
    std::vector<std::vector<Tensor<double>>> grads;
    for (auto* ps : params) grads.push_back(tape.gradients(*ps));

    auto evaluate = [&]() {
        Tape<double> t2;
        return t2.scalar(loss(t2, params));
    };

    GradCheckReport rep;
    std::vector<GradCheckEntry> all;
    Philox rng(derive_seed(opt.seed, {"gradcheck"}));
    for (std::size_t s = 0; s < params.size(); ++s) {
        auto& entries = params[s]->entries();
        for (std::size_t k = 0; k < entries.size(); ++k) {
            auto& e = entries[k];
            const std::size_t n = e.value.size();
            std::vector<std::size_t> coords;
            if (n <= opt.samples_per_tensor) {
                for (std::size_t i = 0; i < n; ++i) coords.push_back(i);
            } else {
                for (std::size_t i = 0; i < opt.samples_per_tensor; ++i) coords.push_back(rng.index(n));
            }
            for (std::size_t i : coords) {
                const double orig = e.value[i];
                e.value[i] = orig + opt.step;
                const double fp = evaluate();
                e.value[i] = orig - opt.step;
                const double fm = evaluate();
                e.value[i] = orig;
                const double num = (fp - fm) / (2 * opt.step);
                const double ana = grads[s][k][i];
                const double rel = std::abs(ana - num) / std::max({std::abs(ana), std::abs(num), opt.floor});
                all.push_back({e.name, i, ana, num, rel});
                ++rep.checked;
                if (!(rel <= opt.tol)) ++rep.failures;
                rep.max_rel_error = std::max(rep.max_rel_error, std::isfinite(rel) ? rel : INFINITY);
            }
        }
    }
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.rel_error > b.rel_error; });
    all.resize(std::min(all.size(), opt.report_worst));
    rep.worst = std::move(all);
    return rep;
}

} // namespace cpbigan::diff
