#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "cpbigan/diff/tensor.hpp"
#include "cpbigan/errors.hpp"
#include "cpbigan/rng.hpp"

namespace cpbigan::diff {

/// Named parameter tensors of one network plus their Adam moments.
template <class T>
class ParamSet {
  public:
    struct Entry {
        std::string name;
        Tensor<T> value;
        std::vector<double> m, v; // Adam moments
    };

    void add(const std::string& name, Tensor<T> value) {
        if (index_.count(name)) throw DataError("ParamSet: duplicate parameter '" + name + "'");
        index_[name] = entries_.size();
        const auto n = value.size();
        entries_.push_back({name, std::move(value), std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)});
    }

    bool contains(const std::string& name) const { return index_.count(name) > 0; }

    std::size_t index(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw DataError("ParamSet: unknown parameter '" + name + "'");
        return it->second;
    }

    Tensor<T>& operator[](const std::string& name) { return entries_[index(name)].value; }
    const Tensor<T>& operator[](const std::string& name) const { return entries_[index(name)].value; }

    std::vector<Entry>& entries() { return entries_; }
    const std::vector<Entry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& e : entries_) n += e.value.size();
        return n;
    }

    void reset_optimizer() {
        for (auto& e : entries_) {
            std::fill(e.m.begin(), e.m.end(), 0.0);
            std::fill(e.v.begin(), e.v.end(), 0.0);
        }
    }

    template <class U>
    ParamSet<U> cast() const {
        ParamSet<U> out;
        for (const auto& e : entries_) {
            out.add(e.name, e.value.template cast<U>());
            auto& o = out.entries().back();
            o.m = e.m;
            o.v = e.v;
        }
        return out;
    }

    bool operator==(const ParamSet& other) const {
        if (entries_.size() != other.entries_.size()) return false;
        for (std::size_t i = 0; i < entries_.size(); ++i)
            if (entries_[i].name != other.entries_[i].name || !(entries_[i].value == other.entries_[i].value)) return false;
        return true;
    }

  private:
    std::vector<Entry> entries_;
    std::map<std::string, std::size_t> index_;
};

/// Fan-in scaled uniform init U(-1/sqrt(fan_in), 1/sqrt(fan_in)). Each tensor
/// draws from its own stream keyed by name, so adding a tensor never perturbs
/// the others.
template <class T>
Tensor<T> fan_in_uniform(const Shape& shape, int fan_in, std::uint64_t seed, const std::string& name) {
    Tensor<T> t(shape);
    Philox rng(derive_seed(seed, {std::string_view(name)}));
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (auto& v : t.data) v = static_cast<T>(rng.uniform(-bound, bound));
    return t;
}

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int max_epochs = 200;

    void validate() const {
        if (!(lr > 0)) throw ConfigError("adam.lr must be > 0");
        if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) throw ConfigError("adam betas must be in [0,1)");
        if (!(eps > 0)) throw ConfigError("adam.eps must be > 0");
        if (max_epochs < 1) throw ConfigError("adam.max_epochs must be >= 1");
    }
};

/// One bias-corrected Adam update at step t (1-based), in place.
template <class T>
void adam_step(ParamSet<T>& params, const std::vector<Tensor<T>>& grads, const AdamConfig& cfg, long t) {
    if (grads.size() != params.size()) throw TrainingError("adam_step: gradient count mismatch");
    if (t < 1) throw TrainingError("adam_step: step must be >= 1");
    for (std::size_t k = 0; k < grads.size(); ++k) {
        const auto& e = params.entries()[k];
        if (grads[k].size() != e.value.size())
            throw TrainingError("adam_step: gradient shape mismatch for '" + e.name + "'");
        if (!grads[k].all_finite()) throw TrainingError("adam_step: non-finite gradient in '" + e.name + "'");
    }
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    for (std::size_t k = 0; k < grads.size(); ++k) {
        auto& e = params.entries()[k];
        for (std::size_t i = 0; i < e.value.size(); ++i) {
            const double g = static_cast<double>(grads[k][i]);
            e.m[i] = cfg.beta1 * e.m[i] + (1.0 - cfg.beta1) * g;
            e.v[i] = cfg.beta2 * e.v[i] + (1.0 - cfg.beta2) * g * g;
            const double mhat = e.m[i] / bc1, vhat = e.v[i] / bc2;
            const double updated = static_cast<double>(e.value[i]) - cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
            e.value[i] = static_cast<T>(updated);
        }
        if (!e.value.all_finite()) throw TrainingError("adam_step: parameter '" + e.name + "' became non-finite");
    }
}

} // namespace cpbigan::diff
