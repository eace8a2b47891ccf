#include <CLI11.hpp>

#include <array>
#include <filesystem>
#include <iostream>

#include "cpbigan/adversarial/checkpoint.hpp"
#include "cpbigan/baselines.hpp"
#include "cpbigan/dataset_io.hpp"
#include "cpbigan/harness/certify.hpp"
#include "cpbigan/harness/report.hpp"

namespace fs = std::filesystem;
using namespace cpbigan;
using namespace cpbigan::harness;

namespace {

constexpr std::array<Split, 3> kSplits{Split::train, Split::validation, Split::test};

struct CommonFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    int jobs = 1;
};

ExperimentConfig resolve(const CommonFlags& f) {
    ExperimentConfig cfg = f.config.empty() ? ExperimentConfig{} : load_config(f.config);
    if (f.seed) cfg.seed = *f.seed;
    if (!f.out.empty()) cfg.out = f.out;
    if (f.jobs < 1) throw ConfigError("--jobs must be >= 1");
    cfg.validate();
    return cfg;
}

fs::path split_path(const fs::path& dir, Split s) { return dir / (std::string(split_name(s)) + ".dataset"); }

std::vector<Dataset> load_splits(const fs::path& dir) {
    std::vector<Dataset> out;
    for (auto s : kSplits) out.push_back(load_dataset(split_path(dir, s)));
    return out;
}

void save_splits(const std::vector<Dataset>& ds, const fs::path& dir, const ExperimentConfig& cfg) {
    fs::create_directories(dir);
    for (const auto& d : ds) save_dataset(d, split_path(dir, d.split));
    cpbigan::detail::write_file(dir / "provenance.txt", harness::detail::provenance(cfg));
}

void cmd_generate(const ExperimentConfig& cfg) {
    GeneratorConfig g = cfg.generator;
    g.seed = cfg.seed;
    auto s = make_dataset(g);
    save_splits({s.train, s.validation, s.test}, cfg.out, cfg);
    std::cout << "wrote " << g.n << " records to " << cfg.out << '\n';
}

void cmd_corrupt(const ExperimentConfig& cfg, const fs::path& input) {
    auto ds = load_splits(input);
    MechanismSpec spec = cfg.factor_missing;
    spec.seed = derive_seed(cfg.seed, {"corrupt"});
    const auto drop_seed = derive_seed(cfg.seed, {"tp1"});
    for (auto& d : ds) {
        auto recs = corrupt_factors(d.records, spec);
        for (auto& r : recs) r = drop_tp1(cfg.tp1_rate, drop_seed, r);
        d.records = std::move(recs);
    }
    save_splits(ds, cfg.out, cfg);
    std::cout << "corrupted " << input.string() << " into " << cfg.out << '\n';
}

adversarial::BundleConfig bundle_for(const ExperimentConfig& cfg, adversarial::Target target, adversarial::Mode mode) {
    adversarial::BundleConfig bc = cfg.adversarial.bundle;
    bc.target = target;
    bc.mode = mode;
    bc.lambda_rec = target == adversarial::Target::factors ? cfg.adversarial.factor_lambda_rec
                                                          : cfg.adversarial.image_lambda_rec;
    bc.seed = derive_seed(cfg.seed, {"imputer", std::string_view(adversarial::mode_name(mode)),
                                     std::string_view(target == adversarial::Target::factors ? "factors" : "image")});
    return bc;
}

void cmd_train(const ExperimentConfig& cfg, const fs::path& input, const std::string& target_s, const std::string& mode_s) {
    using namespace adversarial;
    if (target_s != "factors" && target_s != "image") throw ConfigError("--target must be 'factors' or 'image'");
    const Target target = target_s == "factors" ? Target::factors : Target::image;
    const auto bc = bundle_for(cfg, target, parse_mode(mode_s));
    TrainConfig tc = cfg.adversarial.train;
    tc.adam.max_epochs = target == Target::factors ? cfg.adversarial.factor_epochs : cfg.adversarial.image_epochs;
    tc.seed = derive_seed(bc.seed, {"train"});

    const auto train = load_dataset(split_path(input, Split::train));
    std::vector<AdversarialSample> samples;
    double missing = 0, total = 0;
    for (const auto& r : train.records) {
        if (target == Target::factors) {
            samples.push_back(factor_sample(r, bc.conditioned()));
            for (auto m : r.factors.mask) missing += m ? 0 : 1, total += 1;
        } else if (r.images.tp1_present) {
            if (bc.conditioned() && !r.factors.complete())
                throw DataError("train: record " + std::to_string(r.id) +
                                " has missing factors; impute factors before fitting a conditional image imputer");
            samples.push_back(image_train_sample(r, r.factors.values, bc));
        }
    }
    auto res = Trainer(bc, tc).run(samples, total > 0 ? missing / total : 0.0);
    fs::create_directories(cfg.out);
    const std::string stem = mode_s + "-" + target_s;
    save_checkpoint(res.bundle, fs::path(cfg.out) / (stem + ".ckpt"));
    cpbigan::detail::write_file(fs::path(cfg.out) / (stem + "_curve.csv"),
                                harness::detail::provenance(cfg) + curves_csv(res.curve));
    std::cout << "trained " << stem << " (" << res.curve.size() << " curve points, best epoch " << res.best_epoch << "); checkpoint in " << cfg.out << '\n';
}

void cmd_impute(const ExperimentConfig& cfg, const fs::path& input, const std::string& method, const std::string& ckpt) {
    auto ds = load_splits(input);
    std::vector<MultiModalRecord> all;
    for (const auto& d : ds) all.insert(all.end(), d.records.begin(), d.records.end());
    std::vector<MultiModalRecord> done;
    if (method == "mean") {
        const auto means = observed_means(ds[0].records);
        for (const auto& r : all) done.push_back(mean_impute(means, r).record);
    } else if (method == "soft-impute") {
        for (auto& r : soft_impute_records(all, cfg.soft_impute)) done.push_back(std::move(r.record));
    } else if (method == "locf") {
        for (const auto& r : all) done.push_back(locf_images(r).record);
    } else if (method == "pbigan" || method == "cpbigan" || method == "cpbigan_sharp") {
        if (ckpt.empty()) throw ConfigError("impute: --checkpoint is required for method '" + method + "'");
        auto b = adversarial::load_checkpoint(ckpt);
        if (adversarial::mode_name(b.cfg.mode) != method)
            throw ConfigError("impute: checkpoint holds a " + std::string(adversarial::mode_name(b.cfg.mode)) + " model");
        if (b.cfg.target == adversarial::Target::factors) {
            for (auto& r : adversarial::impute_factors(b, std::span<const MultiModalRecord>(all))) done.push_back(std::move(r.record));
        } else {
            std::vector<std::vector<float>> cond;
            for (const auto& r : all) {
                if (!r.factors.complete())
                    throw DataError("impute: record " + std::to_string(r.id) + " has missing factors; impute factors first");
                cond.push_back(r.factors.values);
            }
            for (auto& r : adversarial::impute_image_tp1(b, std::span<const MultiModalRecord>(all),
                                                         std::span<const std::vector<float>>(cond)))
                done.push_back(std::move(r.record));
        }
    } else {
        throw ConfigError("impute: unknown method '" + method + "'");
    }
    std::size_t k = 0;
    for (auto& d : ds)
        for (auto& r : d.records) r = std::move(done[k++]);
    save_splits(ds, cfg.out, cfg);
    std::cout << "imputed " << all.size() << " records with " << method << " into " << cfg.out << '\n';
}

void print_written(const std::vector<std::pair<std::string, std::string>>& files, const std::string& dir) {
    for (const auto& [path, digest] : files) std::cout << digest << "  " << (fs::path(dir) / path).string() << '\n';
}

void cmd_grid(const ExperimentConfig& cfg, int jobs) {
    const auto res = run_grid(cfg, jobs);
    print_written(write_reports(cfg.out, res, cfg, "grid"), cfg.out);
}

void cmd_sweep(const ExperimentConfig& cfg, int jobs) {
    const auto res = run_sweep(cfg, jobs);
    print_written(write_reports(cfg.out, res, cfg, "sweep"), cfg.out);
}

void cmd_report(const ExperimentConfig& cfg, const fs::path& input) {
    GridResult res;
    res.rows = parse_metrics_csv(cpbigan::detail::read_file(input));
    if (res.rows.empty()) throw DataError("report: " + input.string() + " holds no rows");
    print_written(write_reports(cfg.out, res, cfg, input.stem().string()), cfg.out);
}

int cmd_gradcheck(std::uint64_t first_seed) {
    int failed = 0;
    for (const auto& r : certify_gradients({first_seed, first_seed + 1, first_seed + 2})) {
        std::cout << (r.report.passed() ? "ok   " : "FAIL ") << r.name << " seed " << r.seed << " checked "
                  << r.report.checked << " max_rel " << r.report.max_rel_error << '\n';
        failed += !r.report.passed();
    }
    if (failed) throw TrainingError("gradcheck: " + std::to_string(failed) + " objective(s) failed");
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-modal missing-data imputation experiments on synthetic nodules"};
    app.require_subcommand(1);
    CommonFlags flags;
    std::string input, target = "factors", mode = "cpbigan", method, checkpoint;
    std::uint64_t seed_value = 0;

    auto add_common = [&](CLI::App* sub, bool input_required) {
        sub->add_option("--config", flags.config, "Experiment config file")->check(CLI::ExistingFile);
        sub->add_option("--seed", seed_value, "Global seed (overrides the config)")
            ->each([&](const std::string&) { flags.seed = seed_value; });
        sub->add_option("--out", flags.out, "Output directory");
        sub->add_option("--jobs", flags.jobs, "Parallel workers");
        if (input_required) sub->add_option("--input", input, "Input directory or file")->required();
    };
    auto* generate = app.add_subcommand("generate", "Generate a synthetic dataset (train/validation/test)");
    add_common(generate, false);
    auto* corrupt = app.add_subcommand("corrupt", "Apply factor missingness and tp1 dropout to a dataset");
    add_common(corrupt, true);
    auto* impute = app.add_subcommand("impute", "Complete a corrupted dataset with one imputer");
    add_common(impute, true);
    impute->add_option("--method", method, "mean | soft-impute | locf | pbigan | cpbigan | cpbigan_sharp")->required();
    impute->add_option("--checkpoint", checkpoint, "Checkpoint for adversarial methods");
    auto* train = app.add_subcommand("train", "Fit an adversarial imputer on the train split");
    add_common(train, true);
    train->add_option("--target", target, "factors | image");
    train->add_option("--mode", mode, "pbigan | cpbigan | cpbigan_sharp");
    auto* grid = app.add_subcommand("grid", "Run the image x factor imputer grid");
    add_common(grid, false);
    auto* sweep = app.add_subcommand("sweep", "Run the missing-rate sweep");
    add_common(sweep, false);
    auto* report = app.add_subcommand("report", "Re-emit summary, curves and plots from a metrics CSV");
    add_common(report, true);
    auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every objective over three seeds");
    add_common(gradcheck, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : static_cast<int>(ErrorCategory::config);
    }

    try {
        if (*gradcheck) return cmd_gradcheck(flags.seed.value_or(1));
        const ExperimentConfig cfg = resolve(flags);
        if (*generate) cmd_generate(cfg);
        if (*corrupt) cmd_corrupt(cfg, input);
        if (*train) cmd_train(cfg, input, target, mode);
        if (*impute) cmd_impute(cfg, input, method, checkpoint);
        if (*grid) cmd_grid(cfg, flags.jobs);
        if (*sweep) cmd_sweep(cfg, flags.jobs);
        if (*report) cmd_report(cfg, input);
        return 0;
    } catch (const Error& e) {
        std::cerr << "error (" << category_name(e.category()) << "): " << e.what() << '\n';
        return static_cast<int>(e.category());
    } catch (const std::exception& e) {
        std::cerr << "error (internal): " << e.what() << '\n';
        return static_cast<int>(ErrorCategory::internal);
    }
}
