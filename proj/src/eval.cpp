#include "ldt/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <sstream>

#include <zlib.h>

#include "ldt/dataset.hpp"
#include "ldt/error.hpp"
#include "ldt/metrics.hpp"
#include "ldt/rng.hpp"

namespace ldt {

namespace {

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt_short(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

std::vector<double> midpoint_grid(double lo, double hi, int n) {
    std::vector<double> out;
    out.reserve(static_cast<size_t>(n));
    double step = (hi - lo) / static_cast<double>(n);
    for (int i = 0; i < n; ++i)
        out.push_back(lo + (static_cast<double>(i) + 0.5) * step);
    return out;
}

// Triple at explicit parameters; depth normalized after any rescaling so its
// peak lands exactly on depth_max.
HazeTriple synth_at(const Tensor& clear, const DepthMap& depth, double a, double beta,
                    double depth_max, const std::string& source_id) {
    HazeTriple t;
    t.clear = clear;
    DepthMap norm = normalize_depth(depth, depth_max);
    t.params.a = a;
    t.params.beta = beta;
    t.transmission = transmission_from_depth(norm, beta);
    t.hazy = apply_haze(t.clear, t.transmission, a);
    t.source_id = source_id;
    return t;
}

EvalRecord score(const DehazeModel& model, const HazeTriple& t,
                 const std::string& perturbation, const std::string& bucket) {
    EvalSample sample{t.hazy, t.transmission, t.params.a, t.params.beta};
    Tensor dehazed = model(sample);
    require(dehazed.shape() == t.clear.shape(), ErrorKind::Shape,
            "model output extents ", dehazed.shape().str(),
            " do not match the clear truth ", t.clear.shape().str());
    QualityScore q = quality(dehazed, t.clear);
    return EvalRecord{t.source_id, perturbation, bucket, q.mse, q.psnr, q.ssim};
}

// Digest of the canonical config text; pins a report to its settings.
std::string config_digest(const std::string& canonical) {
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(canonical.data()),
                static_cast<uInt>(canonical.size()));
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%08lx", static_cast<unsigned long>(crc));
    return buf;
}

std::string canonical_config_text(Suite suite, const EvalSuiteConfig& c) {
    std::ostringstream s;
    s << suite_name(suite) << " a " << fmt_double(c.a_value) << " beta "
      << fmt_double(c.beta_value) << " depth_max " << fmt_double(c.depth_max);
    switch (suite) {
        case Suite::Are:
            s << " grid";
            for (double v : c.effective_a_values()) s << ' ' << fmt_double(v);
            break;
        case Suite::Cre:
            s << " grid";
            for (double v : c.effective_beta_values()) s << ' ' << fmt_double(v);
            break;
        case Suite::Sre:
            s << " scales";
            for (double v : c.scale_factors) s << ' ' << fmt_double(v);
            break;
        case Suite::Nre:
            s << " noise";
            for (const NoiseSpec& n : c.noise_specs)
                s << ' ' << noise_kind_name(n.kind) << ':' << fmt_double(n.level);
            break;
        case Suite::Standard:
            break;
    }
    return s.str();
}

EvalReport make_report(Suite suite, const EvalSuiteConfig& config) {
    EvalReport r;
    r.suite = suite_name(suite);
    r.seed = config.seed;
    r.config_digest = config_digest(canonical_config_text(suite, config));
    return r;
}

void finish_report(EvalReport& r) {
    r.aggregates = recompute_aggregates(r.records);
}

void check_sources(const std::vector<SourceImage>& sources) {
    require(!sources.empty(), ErrorKind::Config, "no source images to evaluate on");
}

}  // namespace

const char* suite_name(Suite suite) {
    switch (suite) {
        case Suite::Standard: return "standard";
        case Suite::Are: return "are";
        case Suite::Cre: return "cre";
        case Suite::Sre: return "sre";
        case Suite::Nre: return "nre";
    }
    return "unknown";
}

void EvalSuiteConfig::validate() const {
    HazeParams{a_value, beta_value}.validate();
    for (double a : a_values) HazeParams{a, beta_value}.validate();
    for (double b : beta_values) HazeParams{a_value, b}.validate();
    require(!scale_factors.empty(), ErrorKind::Config, "scale factor list is empty");
    for (double f : scale_factors)
        require(std::isfinite(f) && f > 0.0, ErrorKind::Config,
                "scale factor ", f, " must be positive");
    require(!noise_specs.empty(), ErrorKind::Config, "noise spec list is empty");
    for (const NoiseSpec& n : noise_specs)
        require(std::isfinite(n.level) && n.level > 0.0, ErrorKind::Config,
                "noise level ", n.level, " must be positive");
    require(image_count >= 1, ErrorKind::Config, "image count must be positive");
    require(std::isfinite(depth_max) && depth_max > 0.0, ErrorKind::Config,
            "depth_max must be positive");
}

std::vector<double> EvalSuiteConfig::effective_a_values() const {
    return a_values.empty() ? midpoint_grid(0.7, 1.0, 10) : a_values;
}

std::vector<double> EvalSuiteConfig::effective_beta_values() const {
    return beta_values.empty() ? midpoint_grid(0.5, 1.5, 10) : beta_values;
}

DehazeModel identity_model() {
    return [](const EvalSample& s) { return s.hazy; };
}

DehazeModel inversion_oracle_model() {
    return [](const EvalSample& s) { return invert_haze(s.hazy, s.transmission, s.a); };
}

DehazeModel network_model(const LdtNetParams& params) {
    params.validate();
    // The forward API takes a mutable reference because train mode updates
    // running statistics; eval mode never writes, so a shared copy is safe.
    auto shared = std::make_shared<LdtNetParams>(params);
    return [shared](const EvalSample& s) {
        return forward(*shared, s.hazy, Mode::Eval).dehazed;
    };
}

std::vector<EvalAggregate> recompute_aggregates(const std::vector<EvalRecord>& records) {
    std::vector<EvalAggregate> out;
    auto cell_index = [&out](const std::string& bucket) -> size_t {
        for (size_t i = 0; i < out.size(); ++i)
            if (out[i].bucket == bucket) return i;
        out.push_back(EvalAggregate{bucket, 0, 0.0, 0.0, 0.0});
        return out.size() - 1;
    };
    for (const EvalRecord& r : records) {
        for (size_t i : {cell_index(r.bucket), cell_index("all")}) {
            EvalAggregate& a = out[i];
            a.count += 1;
            a.mean_mse += r.mse;
            a.mean_psnr += r.psnr;
            a.mean_ssim += r.ssim;
        }
    }
    // Sums were accumulated in place; divide once at the end.
    for (EvalAggregate& a : out) {
        a.mean_mse /= static_cast<double>(a.count);
        a.mean_psnr /= static_cast<double>(a.count);
        a.mean_ssim /= static_cast<double>(a.count);
    }
    // Keep "all" last, cell buckets in first-seen order.
    for (size_t i = 0; i < out.size(); ++i) {
        if (out[i].bucket == "all") {
            EvalAggregate all = out[i];
            out.erase(out.begin() + static_cast<int64_t>(i));
            out.push_back(all);
            break;
        }
    }
    return out;
}

EvalReport run_standard_eval(const DehazeModel& model,
                             const std::vector<HazeTriple>& triples,
                             const EvalSuiteConfig& config) {
    config.validate();
    require(!triples.empty(), ErrorKind::Config, "no triples to evaluate on");
    EvalReport r = make_report(Suite::Standard, config);
    for (const HazeTriple& t : triples) {
        std::string pert = "a=" + fmt_short(t.params.a) + ",beta=" +
                           fmt_short(t.params.beta);
        r.records.push_back(score(model, t, pert, "standard"));
    }
    finish_report(r);
    return r;
}

std::vector<HazeTriple> standard_triples(const std::vector<SourceImage>& sources,
                                         const EvalSuiteConfig& config) {
    config.validate();
    check_sources(sources);
    std::vector<HazeTriple> out;
    out.reserve(sources.size());
    for (const SourceImage& s : sources)
        out.push_back(synth_at(s.clear, s.depth, config.a_value, config.beta_value,
                               config.depth_max, s.id));
    return out;
}

EvalReport run_are(const DehazeModel& model, const std::vector<SourceImage>& sources,
                   const EvalSuiteConfig& config) {
    config.validate();
    check_sources(sources);
    EvalReport r = make_report(Suite::Are, config);
    r.notes.push_back("grid: per-source sweep over the atmosphere-light values");
    for (double a : config.effective_a_values()) {
        std::string bucket = "a=" + fmt_short(a);
        for (const SourceImage& s : sources) {
            HazeTriple t =
                synth_at(s.clear, s.depth, a, config.beta_value, config.depth_max, s.id);
            r.records.push_back(score(model, t, bucket, bucket));
        }
    }
    finish_report(r);
    return r;
}

EvalReport run_cre(const DehazeModel& model, const std::vector<SourceImage>& sources,
                   const EvalSuiteConfig& config) {
    config.validate();
    check_sources(sources);
    EvalReport r = make_report(Suite::Cre, config);
    r.notes.push_back("grid: per-source sweep over the scattering coefficients");
    for (double beta : config.effective_beta_values()) {
        std::string bucket = "beta=" + fmt_short(beta);
        for (const SourceImage& s : sources) {
            HazeTriple t =
                synth_at(s.clear, s.depth, config.a_value, beta, config.depth_max, s.id);
            r.records.push_back(score(model, t, bucket, bucket));
        }
    }
    finish_report(r);
    return r;
}

EvalReport run_sre(const DehazeModel& model, const std::vector<SourceImage>& sources,
                   const EvalSuiteConfig& config) {
    config.validate();
    check_sources(sources);
    EvalReport r = make_report(Suite::Sre, config);
    for (double f : config.scale_factors) {
        std::string bucket = "scale=" + fmt_short(f);
        for (const SourceImage& s : sources) {
            Tensor clear = rescale_image(s.clear, f);
            for (float& v : clear.values()) v = std::min(1.0f, std::max(0.0f, v));
            DepthMap depth = DepthMap::from_tensor(rescale_image(s.depth.values, f));
            HazeTriple t = synth_at(clear, depth, config.a_value, config.beta_value,
                                    config.depth_max, s.id);
            r.records.push_back(score(model, t, bucket, bucket));
        }
    }
    finish_report(r);
    return r;
}

EvalReport run_nre(const DehazeModel& model, const std::vector<SourceImage>& sources,
                   const EvalSuiteConfig& config) {
    config.validate();
    check_sources(sources);
    EvalReport r = make_report(Suite::Nre, config);
    for (size_t k = 0; k < config.noise_specs.size(); ++k) {
        const NoiseSpec& spec = config.noise_specs[k];
        std::string bucket = std::string("noise=") + noise_kind_name(spec.kind) + ":" +
                             fmt_short(spec.level);
        for (size_t i = 0; i < sources.size(); ++i) {
            const SourceImage& s = sources[i];
            HazeTriple t = synth_at(s.clear, s.depth, config.a_value, config.beta_value,
                                    config.depth_max, s.id);
            uint64_t noise_seed =
                derive_stream(config.seed, 0x17e0 + k * 4096 + i);
            t.hazy = add_noise(t.hazy, spec.kind, spec.level, noise_seed);
            r.records.push_back(score(model, t, bucket, bucket));
        }
    }
    finish_report(r);
    return r;
}

std::string report_filename(const EvalReport& report) {
    return "report_" + report.suite + "_seed" + std::to_string(report.seed) + "_" +
           report.config_digest + ".txt";
}

void write_report(const EvalReport& report, const std::string& path) {
    std::ostringstream out;
    out << "ldt-report v1\n";
    out << "suite " << report.suite << " seed " << report.seed << " config "
        << report.config_digest << "\n";
    for (const std::string& n : report.notes) out << "note " << n << "\n";
    out << "fields record source perturbation bucket mse psnr ssim\n";
    for (const EvalRecord& r : report.records)
        out << "record " << r.source_id << ' ' << r.perturbation << ' ' << r.bucket << ' '
            << fmt_double(r.mse) << ' ' << fmt_double(r.psnr) << ' ' << fmt_double(r.ssim)
            << "\n";
    for (const EvalAggregate& a : report.aggregates)
        out << "aggregate " << a.bucket << ' ' << a.count << ' ' << fmt_double(a.mean_mse)
            << ' ' << fmt_double(a.mean_psnr) << ' ' << fmt_double(a.mean_ssim) << "\n";

    namespace fs = std::filesystem;
    fs::path final_path(path);
    fs::path tmp_path(path + ".tmp");
    {
        std::ofstream f(tmp_path, std::ios::binary | std::ios::trunc);
        require(f.good(), ErrorKind::Data, "cannot write report ", path);
        f << out.str();
        f.flush();
        require(f.good(), ErrorKind::Data, "write failed for ", path);
    }
    std::error_code ec;
    fs::rename(tmp_path, final_path, ec);
    require(!ec, ErrorKind::Data, "cannot finalize report ", path, ": ", ec.message());
}

EvalReport read_report(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), ErrorKind::Data, "cannot open report ", path);
    std::string line;
    require(static_cast<bool>(std::getline(in, line)) && line == "ldt-report v1",
            ErrorKind::Format, path, ": not a report file");
    EvalReport r;
    int64_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream s(line);
        std::string tag;
        s >> tag;
        auto want = [&](bool ok, const char* what) {
            require(ok, ErrorKind::Format, path, ":", line_no, ": malformed ", what);
        };
        if (tag == "suite") {
            std::string kw_seed, kw_config;
            want(static_cast<bool>(s >> r.suite >> kw_seed >> r.seed >> kw_config >>
                                   r.config_digest) &&
                     kw_seed == "seed" && kw_config == "config",
                 "suite line");
        } else if (tag == "note") {
            std::string rest;
            std::getline(s, rest);
            if (!rest.empty() && rest.front() == ' ') rest.erase(rest.begin());
            r.notes.push_back(rest);
        } else if (tag == "fields") {
            // informational; field order is fixed by the version line
        } else if (tag == "record") {
            EvalRecord rec;
            want(static_cast<bool>(s >> rec.source_id >> rec.perturbation >> rec.bucket >>
                                   rec.mse >> rec.psnr >> rec.ssim),
                 "record line");
            r.records.push_back(std::move(rec));
        } else if (tag == "aggregate") {
            EvalAggregate a;
            want(static_cast<bool>(s >> a.bucket >> a.count >> a.mean_mse >>
                                   a.mean_psnr >> a.mean_ssim),
                 "aggregate line");
            r.aggregates.push_back(std::move(a));
        } else {
            raise(ErrorKind::Format, path, ":", line_no, ": unknown tag '", tag, "'");
        }
    }
    return r;
}

std::string summary_table(const EvalReport& report) {
    std::ostringstream out;
    char line[160];
    std::snprintf(line, sizeof(line), "%-24s %6s %12s %10s %8s\n", "bucket", "n", "mse",
                  "psnr", "ssim");
    out << "suite: " << report.suite << " (seed " << report.seed << ", config "
        << report.config_digest << ")\n"
        << line;
    for (const EvalAggregate& a : report.aggregates) {
        std::snprintf(line, sizeof(line), "%-24s %6lld %12.6f %10.4f %8.4f\n",
                      a.bucket.c_str(), static_cast<long long>(a.count), a.mean_mse,
                      a.mean_psnr, a.mean_ssim);
        out << line;
    }
    return out.str();
}

AlphaSweepReport run_alpha_sweep(const TrainForAlphaFn& train_fn,
                                 const std::vector<HazeTriple>& val_set,
                                 const std::vector<double>& alpha_values,
                                 uint64_t seed) {
    require(!alpha_values.empty(), ErrorKind::Config, "alpha list is empty");
    AlphaSweepReport report;
    report.seed = seed;
    for (double alpha : alpha_values) {
        require(std::isfinite(alpha) && alpha >= 0.0 && alpha <= 1.0, ErrorKind::Config,
                "alpha ", alpha, " outside [0,1]");
        AlphaSweepCell cell;
        cell.alpha = alpha;
        cell.label = alpha == 0.0 ? "auxiliary task removed" : "-";
        try {
            cell.val_mse = train_fn(alpha, val_set);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::Numeric) throw;
            cell.diverged = true;
            cell.val_mse = std::numeric_limits<double>::quiet_NaN();
        }
        report.cells.push_back(std::move(cell));
    }
    return report;
}

void write_alpha_report(const AlphaSweepReport& report, const std::string& path) {
    std::ostringstream out;
    out << "ldt-alpha-sweep v1\n";
    out << "seed " << report.seed << "\n";
    out << "fields cell alpha val_mse status label\n";
    for (const AlphaSweepCell& c : report.cells)
        out << "cell " << fmt_double(c.alpha) << ' ' << fmt_double(c.val_mse) << ' '
            << (c.diverged ? "diverged" : "ok") << ' ' << c.label << "\n";
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    require(f.good(), ErrorKind::Data, "cannot write report ", path);
    f << out.str();
    f.flush();
    require(f.good(), ErrorKind::Data, "write failed for ", path);
}

}  // namespace ldt
