#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ldt/haze.hpp"
#include "ldt/model.hpp"
#include "ldt/scenes.hpp"

namespace ldt {

enum class Suite { Standard, Are, Cre, Sre, Nre };

const char* suite_name(Suite suite);

struct NoiseSpec {
    NoiseKind kind = NoiseKind::Gaussian;
    double level = 0.02;
};

struct EvalSuiteConfig {
    double a_value = 0.85;   // fixed atmosphere light (CRE/SRE/NRE/standard)
    double beta_value = 1.0; // fixed scattering coefficient (ARE/SRE/NRE/standard)
    std::vector<double> a_values;     // ARE grid; empty = 10 midpoints of (0.7,1.0)
    std::vector<double> beta_values;  // CRE grid; empty = 10 midpoints of (0.5,1.5)
    std::vector<double> scale_factors{1.0, 0.8, 0.6, 0.4};
    std::vector<NoiseSpec> noise_specs{{NoiseKind::Gaussian, 0.02},
                                       {NoiseKind::Poisson, 0.01},
                                       {NoiseKind::SaltPepper, 0.02}};
    int64_t image_count = 21;  // sources the CLI generates when none are given
    double depth_max = 5.0;
    uint64_t seed = 0;

    void validate() const;
    std::vector<double> effective_a_values() const;
    std::vector<double> effective_beta_values() const;
};

// Everything a model may look at for one image. Learned models read only
// `hazy`; reference oracles may use the ground-truth haze parameters.
struct EvalSample {
    const Tensor& hazy;
    const Tensor& transmission;
    double a;
    double beta;
};

// Returns the dehazed image, same extents as sample.hazy.
using DehazeModel = std::function<Tensor(const EvalSample&)>;

DehazeModel identity_model();                       // output = hazy input
DehazeModel inversion_oracle_model();               // algebraic inverse, true t and A
DehazeModel network_model(const LdtNetParams& params);

struct EvalRecord {
    std::string source_id;
    std::string perturbation;  // e.g. "a=0.715" or "noise=gaussian:0.02"
    std::string bucket;        // aggregation cell
    double mse = 0.0;
    double psnr = 0.0;
    double ssim = 0.0;
};

struct EvalAggregate {
    std::string bucket;  // one per suite cell plus "all"
    int64_t count = 0;
    double mean_mse = 0.0;
    double mean_psnr = 0.0;
    double mean_ssim = 0.0;
};

struct EvalReport {
    std::string suite;
    uint64_t seed = 0;
    std::string config_digest;  // 8 hex digits over the canonical config text
    std::vector<std::string> notes;
    std::vector<EvalRecord> records;
    std::vector<EvalAggregate> aggregates;
};

// Recomputes per-bucket means from the records, in record order, first-seen
// bucket order, "all" last. Buckets are exactly reproducible from a report.
std::vector<EvalAggregate> recompute_aggregates(const std::vector<EvalRecord>& records);

// Scores the model on already-synthesized triples (single "standard" bucket).
EvalReport run_standard_eval(const DehazeModel& model,
                             const std::vector<HazeTriple>& triples,
                             const EvalSuiteConfig& config);

// Fixed-parameter triples from sources: a_value/beta_value, depth normalized
// to depth_max. The held-out set behind the standard protocol.
std::vector<HazeTriple> standard_triples(const std::vector<SourceImage>& sources,
                                         const EvalSuiteConfig& config);

// Atmosphere-light sweep at fixed beta; one bucket per A value.
EvalReport run_are(const DehazeModel& model, const std::vector<SourceImage>& sources,
                   const EvalSuiteConfig& config);

// Scattering-coefficient sweep at fixed A; one bucket per beta value.
EvalReport run_cre(const DehazeModel& model, const std::vector<SourceImage>& sources,
                   const EvalSuiteConfig& config);

// Image-scale sweep at fixed (A, beta); one bucket per scale factor.
EvalReport run_sre(const DehazeModel& model, const std::vector<SourceImage>& sources,
                   const EvalSuiteConfig& config);

// Noise robustness: noise is added to the hazy input before inference and
// scored against the unchanged clear truth; one bucket per noise kind.
EvalReport run_nre(const DehazeModel& model, const std::vector<SourceImage>& sources,
                   const EvalSuiteConfig& config);

std::string report_filename(const EvalReport& report);
void write_report(const EvalReport& report, const std::string& path);
EvalReport read_report(const std::string& path);

// Formats the aggregates as an aligned table for terminal output.
std::string summary_table(const EvalReport& report);

// Trains at one alpha against a fixed configuration and returns the
// validation MSE. Everything except alpha must be held constant inside.
using TrainForAlphaFn =
    std::function<double(double alpha, const std::vector<HazeTriple>& val_set)>;

struct AlphaSweepCell {
    double alpha = 0.0;
    double val_mse = 0.0;
    bool diverged = false;
    std::string label;  // "auxiliary task removed" at alpha = 0
};

struct AlphaSweepReport {
    uint64_t seed = 0;
    std::vector<AlphaSweepCell> cells;
};

// One training run per alpha; a numeric failure marks the cell diverged and
// the sweep continues.
AlphaSweepReport run_alpha_sweep(const TrainForAlphaFn& train_fn,
                                 const std::vector<HazeTriple>& val_set,
                                 const std::vector<double>& alpha_values,
                                 uint64_t seed);

void write_alpha_report(const AlphaSweepReport& report, const std::string& path);

}  // namespace ldt
