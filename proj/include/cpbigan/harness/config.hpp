#pragma once

#include <algorithm>
#include <filesystem>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "cpbigan/adversarial/trainer.hpp"
#include "cpbigan/baselines.hpp"
#include "cpbigan/dataset_io.hpp"
#include "cpbigan/downstream/mlm.hpp"
#include "cpbigan/missingness.hpp"
#include "cpbigan/synthgen.hpp"

namespace cpbigan::harness {

inline constexpr const char* kVersion = "cpbigan 1.0.0";

// Image-side options (grid rows) and factor-side options (grid columns).
inline const std::vector<std::string>& image_options() {
    static const std::vector<std::string> v{"factor-only", "locf", "pbigan", "cpbigan_sharp", "cpbigan", "fully-observed"};
    return v;
}
inline const std::vector<std::string>& factor_options() {
    static const std::vector<std::string> v{"image-only", "mean", "soft-impute", "pbigan", "cpbigan", "fully-observed"};
    return v;
}

struct AdversarialSettings {
    adversarial::BundleConfig bundle;
    adversarial::TrainConfig train;
    int factor_epochs = 200;
    int image_epochs = 200;
    /// Reconstruction weights per target; pixel MSE is far smaller than factor MSE.
    double factor_lambda_rec = 1.0;
    double image_lambda_rec = 100.0;
    /// Folds for out-of-fold completion of train records by factor imputers; 0 or 1 disables.
    int cross_fit_folds = 0;
};

struct ExperimentConfig {
    std::uint64_t seed = 1;
    std::vector<int> seeds{0, 1, 2, 3, 4};
    std::string out = "results";
    GeneratorConfig generator;
    MechanismSpec factor_missing = mcar_spec(0.3);
    double tp1_rate = 0.5;
    std::vector<std::string> rows = image_options();
    std::vector<std::string> cols = factor_options();
    std::string sweep_axis = "factor_rate";
    std::vector<double> sweep_rates{0.0, 0.2, 0.4, 0.6, 0.8};
    AdversarialSettings adversarial;
    downstream::MlmConfig mlm;
    std::vector<double> soft_impute_lambdas{0.01, 0.05, 0.1, 0.5, 1.0};
    SoftImputeConfig soft_impute;
    int bootstrap_n = 2000;

    void validate() const;
    /// Canonical `key = value` listing of every setting.
    std::string canonical() const;
    std::string digest() const { return digest_hex(canonical()); }
};

namespace detail {

inline std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

inline std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

template <class T>
std::string join(const std::vector<T>& xs) {
    std::ostringstream os;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) os << ',';
        if constexpr (std::is_floating_point_v<T>)
            os << fmt(xs[i]);
        else
            os << xs[i];
    }
    return os.str();
}

struct Parser {
    std::string key, value;
    int line = 0;

    [[noreturn]] void fail(const std::string& why) const {
        throw ConfigError("config line " + std::to_string(line) + " (" + key + "): " + why);
    }
    double real() const {
        try {
            std::size_t used = 0;
            const double v = std::stod(value, &used);
            if (used != value.size()) fail("trailing characters in '" + value + "'");
            return v;
        } catch (const std::logic_error&) {
            fail("expected a number, got '" + value + "'");
        }
    }
    long long integer() const {
        try {
            std::size_t used = 0;
            const long long v = std::stoll(value, &used);
            if (used != value.size()) fail("trailing characters in '" + value + "'");
            return v;
        } catch (const std::logic_error&) {
            fail("expected an integer, got '" + value + "'");
        }
    }
    bool boolean() const {
        if (value == "true" || value == "1") return true;
        if (value == "false" || value == "0") return false;
        fail("expected true/false, got '" + value + "'");
    }
    std::vector<double> reals() const {
        std::vector<double> out;
        for (const auto& s : split_list(value)) {
            Parser p{key, s, line};
            out.push_back(p.real());
        }
        return out;
    }
    std::vector<int> ints() const {
        std::vector<int> out;
        for (const auto& s : split_list(value)) {
            Parser p{key, s, line};
            out.push_back(static_cast<int>(p.integer()));
        }
        return out;
    }
};

} // namespace detail

/// Applies one `key = value` setting; unknown keys are errors.
inline void apply_setting(ExperimentConfig& c, const std::string& key, const std::string& value, int line = 0) {
    detail::Parser p{key, value, line};
    auto& adv = c.adversarial;
    auto& fm = c.factor_missing;
    if (key == "seed") c.seed = static_cast<std::uint64_t>(p.integer());
    else if (key == "seeds") c.seeds = p.ints();
    else if (key == "out") c.out = value;
    else if (key == "generator.n") c.generator.n = static_cast<int>(p.integer());
    else if (key == "generator.class_balance") c.generator.class_balance = p.real();
    else if (key == "generator.noise_scale") c.generator.noise_scale = p.real();
    else if (key == "generator.signal_strength") c.generator.signal_strength = p.real();
    else if (key == "missing.factor.kind") {
        try {
            fm.kind = parse_mechanism(value);
        } catch (const ConfigError& e) {
            p.fail(e.what());
        }
    } else if (key == "missing.factor.rate") fm.rate = p.real();
    else if (key == "missing.factor.driver") {
        if (value == "none") fm.driver_index.reset();
        else fm.driver_index = static_cast<int>(p.integer());
    } else if (key == "missing.factor.slope") fm.slope = p.real();
    else if (key == "missing.factor.targets") fm.targets = value == "all" ? std::vector<int>{} : p.ints();
    else if (key == "missing.tp1_rate") c.tp1_rate = p.real();
    else if (key == "grid.rows") c.rows = detail::split_list(value);
    else if (key == "grid.cols") c.cols = detail::split_list(value);
    else if (key == "sweep.axis") c.sweep_axis = value;
    else if (key == "sweep.rates") c.sweep_rates = p.reals();
    else if (key == "adversarial.latent_dim") adv.bundle.latent_dim = static_cast<int>(p.integer());
    else if (key == "adversarial.cond_dim") adv.bundle.cond_dim = static_cast<int>(p.integer());
    else if (key == "adversarial.factor_lambda_rec") adv.factor_lambda_rec = p.real();
    else if (key == "adversarial.image_lambda_rec") adv.image_lambda_rec = p.real();
    else if (key == "adversarial.lambda_ce") adv.bundle.lambda_ce = p.real();
    else if (key == "adversarial.cross_fit_folds") adv.cross_fit_folds = static_cast<int>(p.integer());
    else if (key == "adversarial.dense_hidden") adv.bundle.widths.dense_hidden = static_cast<int>(p.integer());
    else if (key == "adversarial.channels") {
        auto v = p.ints();
        if (v.size() != 3) p.fail("expected three channel counts");
        std::copy(v.begin(), v.end(), adv.bundle.widths.channels.begin());
    } else if (key == "adversarial.classifier_hidden") adv.bundle.widths.classifier_hidden = static_cast<int>(p.integer());
    else if (key == "adversarial.lr") adv.train.adam.lr = p.real();
    else if (key == "adversarial.factor_epochs") adv.factor_epochs = static_cast<int>(p.integer());
    else if (key == "adversarial.image_epochs") adv.image_epochs = static_cast<int>(p.integer());
    else if (key == "adversarial.batch_size") adv.train.batch_size = static_cast<int>(p.integer());
    else if (key == "adversarial.probe_every") adv.train.probe_every = static_cast<int>(p.integer());
    else if (key == "adversarial.pretrain") adv.train.pretrain = p.boolean();
    else if (key == "adversarial.pretrain_epochs") adv.train.pretrain_epochs = static_cast<int>(p.integer());
    else if (key == "mlm.lr") c.mlm.adam.lr = p.real();
    else if (key == "mlm.epochs") c.mlm.adam.max_epochs = static_cast<int>(p.integer());
    else if (key == "mlm.batch_size") c.mlm.batch_size = static_cast<int>(p.integer());
    else if (key == "mlm.patience") c.mlm.patience = static_cast<int>(p.integer());
    else if (key == "soft_impute.lambdas") c.soft_impute_lambdas = p.reals();
    else if (key == "soft_impute.tol") c.soft_impute.tol = p.real();
    else if (key == "soft_impute.max_iter") c.soft_impute.max_iter = static_cast<int>(p.integer());
    else if (key == "bootstrap.n") c.bootstrap_n = static_cast<int>(p.integer());
    else throw ConfigError("config line " + std::to_string(line) + ": unknown key '" + key + "'");
}

/// Parses `key = value` lines. `[section]` headers prefix the keys that follow
/// with `section.`; `#` starts a comment.
inline ExperimentConfig parse_config(const std::string& text, ExperimentConfig base = {}) {
    std::istringstream in(text);
    std::string raw, section;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        if (auto h = raw.find('#'); h != std::string::npos) raw.erase(h);
        const std::string s = detail::trim(raw);
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']') throw ConfigError("config line " + std::to_string(line) + ": unterminated section");
            section = detail::trim(s.substr(1, s.size() - 2));
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(line) + ": expected key = value");
        std::string key = detail::trim(s.substr(0, eq));
        if (!section.empty()) key = section + "." + key;
        apply_setting(base, key, detail::trim(s.substr(eq + 1)), line);
    }
    base.validate();
    return base;
}

inline ExperimentConfig load_config(const std::filesystem::path& p) {
    return parse_config(cpbigan::detail::read_file(p));
}

inline void ExperimentConfig::validate() const {
    generator.validate();
    if (generator.n < 10) throw ConfigError("generator.n must be >= 10");
    factor_missing.validate();
    if (!(tp1_rate >= 0 && tp1_rate <= 1)) throw ConfigError("missing.tp1_rate must be in [0,1]");
    if (seeds.empty()) throw ConfigError("seeds must be non-empty");
    for (const auto& r : rows)
        if (std::find(image_options().begin(), image_options().end(), r) == image_options().end())
            throw ConfigError("grid.rows: unknown image imputer '" + r + "'");
    for (const auto& c : cols)
        if (std::find(factor_options().begin(), factor_options().end(), c) == factor_options().end())
            throw ConfigError("grid.cols: unknown factor imputer '" + c + "'");
    if (sweep_axis != "factor_rate" && sweep_axis != "tp1_rate")
        throw ConfigError("sweep.axis must be factor_rate or tp1_rate");
    if (sweep_rates.empty() || std::find(sweep_rates.begin(), sweep_rates.end(), 0.0) == sweep_rates.end())
        throw ConfigError("sweep.rates must include 0.0");
    for (double r : sweep_rates)
        if (!(r >= 0 && r <= 1)) throw ConfigError("sweep.rates entries must be in [0,1]");
    auto b = adversarial.bundle;
    b.validate();
    if (!(adversarial.factor_lambda_rec >= 0) || !(adversarial.image_lambda_rec >= 0))
        throw ConfigError("adversarial reconstruction weights must be >= 0");
    adversarial.train.validate();
    if (adversarial.factor_epochs < 1 || adversarial.image_epochs < 1) throw ConfigError("adversarial epochs must be >= 1");
    if (adversarial.cross_fit_folds < 0 || adversarial.cross_fit_folds == 1)
        throw ConfigError("adversarial.cross_fit_folds must be 0 or >= 2");
    mlm.adam.validate();
    if (mlm.batch_size < 1 || mlm.patience < 0) throw ConfigError("mlm.batch_size/patience invalid");
    if (soft_impute_lambdas.empty()) throw ConfigError("soft_impute.lambdas must be non-empty");
    soft_impute.validate();
    if (bootstrap_n < 1) throw ConfigError("bootstrap.n must be >= 1");
}

inline std::string ExperimentConfig::canonical() const {
    using detail::fmt;
    using detail::join;
    std::ostringstream os;
    const auto& a = adversarial;
    const auto& w = a.bundle.widths;
    os << "seed = " << seed << '\n'
       << "seeds = " << join(seeds) << '\n'
       << "generator.n = " << generator.n << '\n'
       << "generator.class_balance = " << fmt(generator.class_balance) << '\n'
       << "generator.noise_scale = " << fmt(generator.noise_scale) << '\n'
       << "generator.signal_strength = " << fmt(generator.signal_strength) << '\n'
       << "missing.factor.kind = " << mechanism_name(factor_missing.kind) << '\n'
       << "missing.factor.rate = " << fmt(factor_missing.rate) << '\n'
       << "missing.factor.driver = " << (factor_missing.driver_index ? std::to_string(*factor_missing.driver_index) : "none") << '\n'
       << "missing.factor.slope = " << fmt(factor_missing.slope) << '\n'
       << "missing.factor.targets = " << (factor_missing.targets.empty() ? "all" : join(factor_missing.targets)) << '\n'
       << "missing.tp1_rate = " << fmt(tp1_rate) << '\n'
       << "grid.rows = " << join(rows) << '\n'
       << "grid.cols = " << join(cols) << '\n'
       << "sweep.axis = " << sweep_axis << '\n'
       << "sweep.rates = " << join(sweep_rates) << '\n'
       << "adversarial.latent_dim = " << a.bundle.latent_dim << '\n'
       << "adversarial.cond_dim = " << a.bundle.cond_dim << '\n'
       << "adversarial.factor_lambda_rec = " << fmt(a.factor_lambda_rec) << '\n'
       << "adversarial.image_lambda_rec = " << fmt(a.image_lambda_rec) << '\n'
       << "adversarial.cross_fit_folds = " << a.cross_fit_folds << '\n'
       << "adversarial.lambda_ce = " << fmt(a.bundle.lambda_ce) << '\n'
       << "adversarial.dense_hidden = " << w.dense_hidden << '\n'
       << "adversarial.channels = " << w.channels[0] << ',' << w.channels[1] << ',' << w.channels[2] << '\n'
       << "adversarial.classifier_hidden = " << w.classifier_hidden << '\n'
       << "adversarial.lr = " << fmt(a.train.adam.lr) << '\n'
       << "adversarial.factor_epochs = " << a.factor_epochs << '\n'
       << "adversarial.image_epochs = " << a.image_epochs << '\n'
       << "adversarial.batch_size = " << a.train.batch_size << '\n'
       << "adversarial.probe_every = " << a.train.probe_every << '\n'
       << "adversarial.pretrain = " << (a.train.pretrain ? "true" : "false") << '\n'
       << "adversarial.pretrain_epochs = " << a.train.pretrain_epochs << '\n'
       << "mlm.lr = " << fmt(mlm.adam.lr) << '\n'
       << "mlm.epochs = " << mlm.adam.max_epochs << '\n'
       << "mlm.batch_size = " << mlm.batch_size << '\n'
       << "mlm.patience = " << mlm.patience << '\n'
       << "soft_impute.lambdas = " << join(soft_impute_lambdas) << '\n'
       << "soft_impute.tol = " << fmt(soft_impute.tol) << '\n'
       << "soft_impute.max_iter = " << soft_impute.max_iter << '\n'
       << "bootstrap.n = " << bootstrap_n << '\n';
    return os.str();
}

} // namespace cpbigan::harness
