#pragma once

#include <filesystem>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "cpbigan/adversarial/trainer.hpp"
#include "cpbigan/dataset_io.hpp"

namespace cpbigan::adversarial {

inline constexpr const char* kCheckpointMagic = "cpbigan-checkpoint";

namespace detail {

inline std::vector<std::pair<std::string, ParamSet<float>*>> named_sets(AdversarialBundle<float>& b) {
    return {{"encoder_a", &b.encoder_a},
            {"decoder_a", &b.decoder_a},
            {"discriminator", &b.discriminator},
            {"encoder_b", &b.encoder_b},
            {"classifier", &b.classifier}};
}

} // namespace detail

// Manifest layout:
//   cpbigan-checkpoint 1
//   target factors|image
//   mode <name>
//   latent_dim / cond_dim / lambda_rec / lambda_ce / seed
//   widths <dense> <c0> <c1> <c2> <classifier>
//   t <set> <name> <rank> <dims...> <offset>
// followed by a little-endian float32 payload in <path>.bin.
inline void save_checkpoint(AdversarialBundle<float> b, const std::filesystem::path& path) {
    std::ostringstream m;
    std::string blob;
    const auto& c = b.cfg;
    m << kCheckpointMagic << " 1\n";
    m << "target " << (c.target == Target::factors ? "factors" : "image") << '\n';
    m << "mode " << mode_name(c.mode) << '\n';
    m << "latent_dim " << c.latent_dim << "\ncond_dim " << c.cond_dim << '\n';
    m << "lambda_rec " << cpbigan::detail::hexfloat(c.lambda_rec) << "\nlambda_ce "
      << cpbigan::detail::hexfloat(c.lambda_ce) << '\n';
    m << "seed " << c.seed << '\n';
    m << "widths " << c.widths.dense_hidden << ' ' << c.widths.channels[0] << ' ' << c.widths.channels[1] << ' '
      << c.widths.channels[2] << ' ' << c.widths.classifier_hidden << '\n';
    for (auto& [set, ps] : detail::named_sets(b)) {
        for (const auto& e : ps->entries()) {
            m << "t " << set << ' ' << e.name << ' ' << e.value.rank();
            for (int d : e.value.shape) m << ' ' << d;
            m << ' ' << blob.size() << '\n';
            for (float v : e.value.data) cpbigan::detail::put_f32(blob, v);
        }
    }
    cpbigan::detail::write_file(path, m.str());
    cpbigan::detail::write_file(blob_path(path), blob);
}

inline AdversarialBundle<float> load_checkpoint(const std::filesystem::path& path) {
    const std::string manifest = cpbigan::detail::read_file(path);
    const std::string blob = cpbigan::detail::read_file(blob_path(path));
    std::istringstream in(manifest);
    std::string line;
    int lineno = 0;
    auto fail = [&](const std::string& why) { throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + why); };
    BundleConfig cfg;
    struct Pending {
        std::string set, name;
        diff::Shape shape;
        std::size_t offset;
    };
    std::vector<Pending> tensors;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (lineno == 1) {
            int version = 0;
            if (key != kCheckpointMagic || !(ls >> version) || version != 1) fail("not a checkpoint manifest");
            continue;
        }
        std::string s;
        if (key == "target") {
            ls >> s;
            if (s != "factors" && s != "image") fail("bad target '" + s + "'");
            cfg.target = s == "factors" ? Target::factors : Target::image;
        } else if (key == "mode") {
            ls >> s;
            cfg.mode = parse_mode(s);
        } else if (key == "latent_dim") {
            ls >> cfg.latent_dim;
        } else if (key == "cond_dim") {
            ls >> cfg.cond_dim;
        } else if (key == "lambda_rec" || key == "lambda_ce") {
            ls >> s;
            (key == "lambda_rec" ? cfg.lambda_rec : cfg.lambda_ce) = std::strtod(s.c_str(), nullptr);
        } else if (key == "seed") {
            ls >> cfg.seed;
        } else if (key == "widths") {
            auto& w = cfg.widths;
            ls >> w.dense_hidden >> w.channels[0] >> w.channels[1] >> w.channels[2] >> w.classifier_hidden;
        } else if (key == "t") {
            Pending p;
            int rank = 0;
            ls >> p.set >> p.name >> rank;
            p.shape.resize(static_cast<std::size_t>(std::max(rank, 0)));
            for (auto& d : p.shape) ls >> d;
            ls >> p.offset;
            tensors.push_back(std::move(p));
        } else if (!key.empty()) {
            fail("unknown key '" + key + "'");
        }
        if (ls.fail()) fail("malformed line");
    }
    auto b = make_bundle<float>(cfg);
    auto sets = detail::named_sets(b);
    std::size_t loaded = 0;
    for (const auto& p : tensors) {
        ParamSet<float>* target = nullptr;
        for (auto& [n, ps] : sets)
            if (n == p.set) target = ps;
        if (!target || !target->contains(p.name)) throw DataError("checkpoint: unexpected tensor " + p.set + "/" + p.name);
        auto& t = (*target)[p.name];
        if (t.shape != p.shape)
            throw DataError("checkpoint: shape mismatch for " + p.name + ": " + diff::shape_str(p.shape) + " vs " +
                            diff::shape_str(t.shape));
        if (p.offset + t.size() * 4 > blob.size())
            throw DataError("checkpoint: payload truncated at byte " + std::to_string(blob.size()) + " reading " + p.name);
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = cpbigan::detail::get_f32(blob, p.offset + 4 * i);
        ++loaded;
    }
    std::size_t expected = 0;
    for (auto& [n, ps] : sets) expected += ps->size();
    if (loaded != expected) throw DataError("checkpoint: " + std::to_string(expected - loaded) + " tensors missing");
    return b;
}

/// epoch,step,d_loss,g_loss,ce,rec with round-trip precision.
inline std::string curves_csv(const std::vector<CurvePoint>& curve) {
    std::ostringstream os;
    os << "epoch,step,d_loss,g_loss,ce,rec\n" << std::setprecision(17);
    for (const auto& p : curve)
        os << p.epoch << ',' << p.step << ',' << p.d_loss << ',' << p.g_loss << ',' << p.ce << ',' << p.rec << '\n';
    return os.str();
}

} // namespace cpbigan::adversarial
