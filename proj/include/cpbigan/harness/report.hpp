#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cpbigan/adversarial/checkpoint.hpp"
#include "cpbigan/dataset_io.hpp"
#include "cpbigan/harness/config.hpp"
#include "cpbigan/harness/pipeline.hpp"

namespace cpbigan::harness {

inline constexpr const char* kMetricsHeader =
    "kind,image_imputer,factor_imputer,mechanism,factor_rate,tp1_rate,seed,auc,validation_auc,p_value,status";

namespace detail {

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c == '\n' ? ' ' : c;
    }
    return out + '"';
}

inline std::vector<std::string> csv_split(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(std::move(cur));
    return out;
}

inline std::string fixed(double v, int digits) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

inline std::string provenance(const ExperimentConfig& cfg) {
    return std::string("# ") + kVersion + "\n# config_digest " + cfg.digest() + "\n";
}

} // namespace detail

/// Full-precision per-cell metrics, prefixed by version and config digest.
inline std::string metrics_csv(const std::vector<MetricsRow>& rows, const ExperimentConfig& cfg) {
    using detail::fmt;
    std::ostringstream os;
    os << detail::provenance(cfg) << kMetricsHeader << '\n';
    for (const auto& r : rows) {
        os << r.kind << ',' << r.image_imputer << ',' << r.factor_imputer << ',' << r.mechanism << ',' << fmt(r.factor_rate)
           << ',' << fmt(r.tp1_rate) << ',' << r.seed << ',' << (std::isnan(r.auc) ? "" : fmt(r.auc)) << ','
           << (std::isnan(r.validation_auc) ? "" : fmt(r.validation_auc)) << ','
           << (r.p_value ? fmt(*r.p_value) : "") << ',' << detail::csv_field(r.status) << '\n';
    }
    return os.str();
}

inline std::vector<MetricsRow> parse_metrics_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::vector<MetricsRow> rows;
    bool header = false;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        if (!header) {
            if (line != kMetricsHeader) throw DataError("metrics csv: unexpected header at line " + std::to_string(lineno));
            header = true;
            continue;
        }
        const auto f = detail::csv_split(line);
        if (f.size() != 11) throw DataError("metrics csv line " + std::to_string(lineno) + ": expected 11 fields");
        try {
            MetricsRow r;
            r.kind = f[0];
            r.image_imputer = f[1];
            r.factor_imputer = f[2];
            r.mechanism = f[3];
            r.factor_rate = std::stod(f[4]);
            r.tp1_rate = std::stod(f[5]);
            r.seed = std::stoi(f[6]);
            if (!f[7].empty()) r.auc = std::stod(f[7]);
            if (!f[8].empty()) r.validation_auc = std::stod(f[8]);
            if (!f[9].empty()) r.p_value = std::stod(f[9]);
            r.status = f[10];
            rows.push_back(std::move(r));
        } catch (const std::logic_error&) {
            throw DataError("metrics csv line " + std::to_string(lineno) + ": malformed number");
        }
    }
    if (!header) throw DataError("metrics csv: missing header");
    return rows;
}

struct CellSummary {
    std::string kind, image_imputer, factor_imputer;
    double factor_rate = 0, tp1_rate = 0;
    int n_ok = 0, n_failed = 0;
    double mean_auc = std::numeric_limits<double>::quiet_NaN();
    double sd_auc = std::numeric_limits<double>::quiet_NaN();
    /// Largest per-seed p-value; NaN when no seed reported one.
    double max_p = std::numeric_limits<double>::quiet_NaN();
};

/// Mean and sample SD of AUC over seeds, grouped by cell in first-seen order.
inline std::vector<CellSummary> summarize(const std::vector<MetricsRow>& rows) {
    std::vector<CellSummary> out;
    std::vector<std::vector<double>> aucs;
    for (const auto& r : rows) {
        auto it = std::find_if(out.begin(), out.end(), [&](const CellSummary& s) {
            return s.kind == r.kind && s.image_imputer == r.image_imputer && s.factor_imputer == r.factor_imputer &&
                   s.factor_rate == r.factor_rate && s.tp1_rate == r.tp1_rate;
        });
        if (it == out.end()) {
            out.push_back({r.kind, r.image_imputer, r.factor_imputer, r.factor_rate, r.tp1_rate});
            aucs.emplace_back();
            it = out.end() - 1;
        }
        auto& vals = aucs[static_cast<std::size_t>(it - out.begin())];
        if (!r.ok()) {
            ++it->n_failed;
            continue;
        }
        ++it->n_ok;
        vals.push_back(r.auc);
        if (r.p_value && (std::isnan(it->max_p) || *r.p_value > it->max_p)) it->max_p = *r.p_value;
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
        const auto& v = aucs[i];
        if (v.empty()) continue;
        double m = 0;
        for (double a : v) m += a;
        m /= static_cast<double>(v.size());
        double ss = 0;
        for (double a : v) ss += (a - m) * (a - m);
        out[i].mean_auc = m;
        out[i].sd_auc = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
    }
    return out;
}

inline std::string summary_csv(const std::vector<CellSummary>& cells, const ExperimentConfig& cfg) {
    std::ostringstream os;
    os << detail::provenance(cfg) << "kind,image_imputer,factor_imputer,factor_rate,tp1_rate,n_ok,n_failed,mean_auc,sd_auc,max_p\n";
    auto num = [](double v, int d) { return std::isnan(v) ? std::string() : detail::fixed(v, d); };
    for (const auto& c : cells)
        os << c.kind << ',' << c.image_imputer << ',' << c.factor_imputer << ',' << detail::fmt(c.factor_rate) << ','
           << detail::fmt(c.tp1_rate) << ',' << c.n_ok << ',' << c.n_failed << ',' << num(c.mean_auc, 6) << ','
           << num(c.sd_auc, 6) << ',' << num(c.max_p, 4) << '\n';
    return os.str();
}

/// Line plot of mean AUC against missing rate, one polyline per method.
inline std::string sweep_svg(const std::vector<MetricsRow>& rows, const ExperimentConfig& cfg) {
    const bool factor_axis = cfg.sweep_axis == "factor_rate";
    std::map<std::string, std::map<double, std::pair<double, int>>> series;
    for (const auto& r : rows) {
        if (r.kind != "sweep" || !r.ok()) continue;
        const std::string method = factor_axis ? r.factor_imputer : r.image_imputer;
        auto& cell = series[method][factor_axis ? r.factor_rate : r.tp1_rate];
        cell.first += r.auc;
        cell.second += 1;
    }
    constexpr double W = 480, H = 320, L = 60, R = 20, T = 30, B = 50;
    double lo = 1, hi = 0;
    for (const auto& [m, pts] : series)
        for (const auto& [x, s] : pts) {
            lo = std::min(lo, s.first / s.second);
            hi = std::max(hi, s.first / s.second);
        }
    if (lo > hi) lo = 0.5, hi = 1.0;
    lo = std::floor(lo * 20) / 20;
    hi = std::max(lo + 0.05, std::ceil(hi * 20) / 20);
    auto px = [&](double x) { return L + x * (W - L - R); };
    auto py = [&](double y) { return H - B - (y - lo) / (hi - lo) * (H - T - B); };
    using detail::fixed;
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
    os << "<!-- " << kVersion << " config_digest " << cfg.digest() << " -->\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 5; ++k) {
        const double x = k / 5.0;
        os << "<text x=\"" << fixed(px(x), 1) << "\" y=\"" << H - B + 18 << "\" font-size=\"11\" text-anchor=\"middle\">"
           << fixed(x, 1) << "</text>\n";
    }
    for (double y = lo; y <= hi + 1e-9; y += 0.05)
        os << "<text x=\"" << L - 6 << "\" y=\"" << fixed(py(y) + 4, 1) << "\" font-size=\"11\" text-anchor=\"end\">"
           << fixed(y, 2) << "</text>\n";
    os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" font-size=\"12\" text-anchor=\"middle\">"
       << (factor_axis ? "factor missing rate" : "tp1 missing rate") << "</text>\n";
    os << "<text x=\"14\" y=\"" << (T + H - B) / 2 << "\" font-size=\"12\" transform=\"rotate(-90 14 " << (T + H - B) / 2
       << ")\" text-anchor=\"middle\">test AUC</text>\n";
    const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
    int ci = 0;
    for (const auto& [method, pts] : series) {
        const char* color = colors[ci % 5];
        os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
        bool first = true;
        for (const auto& [x, s] : pts) {
            os << (first ? "" : " ") << fixed(px(x), 2) << ',' << fixed(py(s.first / s.second), 2);
            first = false;
        }
        os << "\"/>\n";
        os << "<text x=\"" << W - R - 90 << "\" y=\"" << T + 14 * (ci + 1) << "\" font-size=\"11\" fill=\"" << color << "\">"
           << method << "</text>\n";
        ++ci;
    }
    os << "</svg>\n";
    return os.str();
}

/// Writes metrics, summary, loss curves and (for sweeps) the plot into
/// `dir`; returns the written paths with their digests, sorted by path.
inline std::vector<std::pair<std::string, std::string>> write_reports(const std::filesystem::path& dir,
                                                                      const GridResult& res,
                                                                      const ExperimentConfig& cfg,
                                                                      const std::string& stem) {
    std::filesystem::create_directories(dir / "curves");
    std::vector<std::pair<std::string, std::string>> written;
    auto put = [&](const std::filesystem::path& rel, const std::string& text) {
        cpbigan::detail::write_file(dir / rel, text);
        written.emplace_back(rel.generic_string(), digest_hex(text));
    };
    put(stem + ".csv", metrics_csv(res.rows, cfg));
    put(stem + "_summary.csv", summary_csv(summarize(res.rows), cfg));
    if (stem == "sweep") put("sweep.svg", sweep_svg(res.rows, cfg));
    for (const auto& c : res.curves)
        put(std::filesystem::path("curves") / (stem + "_" + c.name + "_seed" + std::to_string(c.seed) + ".csv"),
            detail::provenance(cfg) + adversarial::curves_csv(c.curve));
    std::sort(written.begin(), written.end());
    std::ostringstream manifest;
    manifest << detail::provenance(cfg);
    for (const auto& [p, d] : written) manifest << d << "  " << p << '\n';
    cpbigan::detail::write_file(dir / (stem + "_digests.txt"), manifest.str());
    return written;
}

} // namespace cpbigan::harness
