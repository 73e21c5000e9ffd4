#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "ldt/checkpoint.hpp"
#include "ldt/dataset.hpp"
#include "ldt/error.hpp"
#include "ldt/eval.hpp"
#include "ldt/image_io.hpp"
#include "ldt/metrics.hpp"
#include "ldt/parallel.hpp"
#include "ldt/rng.hpp"
#include "ldt/scenes.hpp"
#include "ldt/trainer.hpp"

namespace fs = std::filesystem;
using namespace ldt;

namespace {

int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Config: return 2;
        case ErrorKind::Numeric: return 4;
        case ErrorKind::Contract: return 4;
        default: return 3;  // data, format, shape, domain: bad inputs
    }
}

struct GlobalArgs {
    uint64_t seed = 1;
    int threads = 1;
    std::string out = ".";
};

fs::path out_path(const GlobalArgs& g, const std::string& name) {
    fs::create_directories(g.out);
    return fs::path(g.out) / name;
}

// ---- synth ----------------------------------------------------------------

struct SynthArgs {
    int64_t count = 200;
    int64_t height = 64;
    int64_t width = 64;
    int64_t sources = 24;
    double a_lo = 0.7, a_hi = 1.0;
    double beta_lo = 0.5, beta_hi = 1.5;
    double depth_max = 5.0;
};

int cmd_synth(const GlobalArgs& g, const SynthArgs& a) {
    DatasetConfig cfg;
    cfg.count = a.count;
    cfg.height = a.height;
    cfg.width = a.width;
    cfg.a_lo = a.a_lo;
    cfg.a_hi = a.a_hi;
    cfg.beta_lo = a.beta_lo;
    cfg.beta_hi = a.beta_hi;
    cfg.depth_max = a.depth_max;
    cfg.seed = g.seed;
    cfg.validate();
    require(a.sources >= 1, ErrorKind::Config, "source count must be positive");

    std::vector<SourceImage> sources =
        procedural_sources(derive_stream(g.seed, 0x5c5), a.sources, a.height, a.width);
    std::vector<HazeTriple> triples = generate_dataset(sources, cfg);
    fs::create_directories(g.out);
    save_dataset(g.out, triples, cfg);
    std::printf("wrote %zu triples (%lldx%lld, %lld scenes) to %s\n", triples.size(),
                static_cast<long long>(a.height), static_cast<long long>(a.width),
                static_cast<long long>(a.sources), g.out.c_str());
    return 0;
}

// ---- train ----------------------------------------------------------------

struct TrainArgs {
    std::string data;
    int64_t epochs = 30;
    int64_t batch = 4;
    double alpha = 0.4;
    double lr = 1e-3;
    double val_fraction = 0.1;
    int64_t crop = 0;
    double clip_norm = 0.0;
};

int cmd_train(const GlobalArgs& g, const TrainArgs& a) {
    LoadedDataset ds = load_dataset(a.data);
    TrainConfig cfg;
    cfg.adam.lr = a.lr;
    cfg.adam.clip_norm = a.clip_norm;
    cfg.alpha = a.alpha;
    cfg.batch_size = a.batch;
    cfg.epochs = a.epochs;
    cfg.seed = g.seed;
    cfg.val_fraction = a.val_fraction;
    cfg.crop = a.crop;
    cfg.log_path = out_path(g, "train_log.csv").string();
    cfg.checkpoint_path = out_path(g, "weights.ldt").string();
    if (cfg.crop > 0)
        std::fprintf(stderr, "training on random %lldx%lld crops\n",
                     static_cast<long long>(cfg.crop), static_cast<long long>(cfg.crop));
    cfg.on_epoch = [&](const EpochStats& s) {
        std::fprintf(stderr, "epoch %lld/%lld loss %.6f val_mse %.6f%s\n",
                     static_cast<long long>(s.epoch), static_cast<long long>(a.epochs),
                     s.train_loss, s.val_mse, s.improved ? " *" : "");
    };
    TrainResult r = train_model(ds.triples, cfg);
    std::printf("best epoch %lld val_mse %.8f\n", static_cast<long long>(r.best_epoch),
                r.best_val_mse);
    std::printf("weights: %s\nlog: %s\n", cfg.checkpoint_path.c_str(),
                cfg.log_path.c_str());
    return 0;
}

// ---- dehaze ---------------------------------------------------------------

struct DehazeArgs {
    std::string weights;
    std::string input;
    bool write_trans = false;
};

bool is_image_file(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext == ".png" || ext == ".ppm" || ext == ".pgm";
}

int cmd_dehaze(const GlobalArgs& g, const DehazeArgs& a) {
    LdtNetParams params = load_params(a.weights);
    std::vector<fs::path> inputs;
    if (fs::is_directory(a.input)) {
        for (const auto& entry : fs::directory_iterator(a.input))
            if (entry.is_regular_file() && is_image_file(entry.path()))
                inputs.push_back(entry.path());
        std::sort(inputs.begin(), inputs.end());
        require(!inputs.empty(), ErrorKind::Data, "no images found in ", a.input);
    } else {
        inputs.push_back(a.input);
    }
    for (const fs::path& in : inputs) {
        Tensor hazy = load_image(in.string());
        require(hazy.shape().c == 3, ErrorKind::Data, in.string(),
                ": dehazing expects a 3-channel image, got ", hazy.shape().c);
        ForwardTrace trace = forward(params, hazy, Mode::Eval);
        std::string stem = in.stem().string();
        fs::path dehazed_path = out_path(g, stem + "_dehazed.png");
        save_image(trace.dehazed, dehazed_path.string(), 8);
        std::printf("%s -> %s\n", in.string().c_str(), dehazed_path.string().c_str());
        if (a.write_trans) {
            fs::path trans_path = out_path(g, stem + "_trans.png");
            save_image(trace.transmission, trans_path.string(), 16);
            std::printf("%s -> %s\n", in.string().c_str(), trans_path.string().c_str());
        }
    }
    return 0;
}

// ---- eval -----------------------------------------------------------------

struct EvalArgs {
    std::string weights;
    std::string model = "network";  // network | oracle | identity
    std::string suite = "standard"; // standard | are | cre | sre | nre | all
    int64_t images = 21;
    int64_t height = 64;
    int64_t width = 64;
    double a_value = 0.85;
    double beta_value = 1.0;
    double depth_max = 5.0;
};

int cmd_eval(const GlobalArgs& g, const EvalArgs& a) {
    DehazeModel model;
    if (a.model == "network") {
        require(!a.weights.empty(), ErrorKind::Config,
                "--weights is required for the network model");
        model = network_model(load_params(a.weights));
    } else if (a.model == "oracle") {
        model = inversion_oracle_model();
    } else if (a.model == "identity") {
        model = identity_model();
    } else {
        raise(ErrorKind::Config, "unknown model '", a.model,
              "' (choices: network, oracle, identity)");
    }

    EvalSuiteConfig cfg;
    cfg.a_value = a.a_value;
    cfg.beta_value = a.beta_value;
    cfg.image_count = a.images;
    cfg.depth_max = a.depth_max;
    cfg.seed = g.seed;
    cfg.validate();

    std::vector<SourceImage> sources =
        procedural_sources(derive_stream(g.seed, 0xe7a1), a.images, a.height, a.width);

    std::vector<EvalReport> reports;
    auto run_one = [&](const std::string& name) {
        if (name == "standard")
            reports.push_back(run_standard_eval(model, standard_triples(sources, cfg), cfg));
        else if (name == "are")
            reports.push_back(run_are(model, sources, cfg));
        else if (name == "cre")
            reports.push_back(run_cre(model, sources, cfg));
        else if (name == "sre")
            reports.push_back(run_sre(model, sources, cfg));
        else if (name == "nre")
            reports.push_back(run_nre(model, sources, cfg));
        else
            raise(ErrorKind::Config, "unknown suite '", name,
                  "' (choices: standard, are, cre, sre, nre, all)");
    };
    if (a.suite == "all") {
        for (const char* name : {"standard", "are", "cre", "sre", "nre"}) run_one(name);
    } else {
        run_one(a.suite);
    }
    for (const EvalReport& r : reports) {
        fs::path path = out_path(g, report_filename(r));
        write_report(r, path.string());
        std::printf("%s", summary_table(r).c_str());
        std::printf("report: %s\n\n", path.string().c_str());
    }
    return 0;
}

// ---- sweep-alpha ----------------------------------------------------------

struct SweepArgs {
    std::vector<double> alphas{0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
    int64_t count = 96;
    int64_t height = 48;
    int64_t width = 48;
    int64_t epochs = 10;
    int64_t batch = 4;
    double lr = 1e-3;
    double val_fraction = 0.15;
};

int cmd_sweep_alpha(const GlobalArgs& g, const SweepArgs& a) {
    DatasetConfig dcfg;
    dcfg.count = a.count;
    dcfg.height = a.height;
    dcfg.width = a.width;
    dcfg.seed = derive_stream(g.seed, 0xa1fa);
    dcfg.validate();
    int64_t source_count = std::max<int64_t>(8, a.count / 8);
    std::vector<SourceImage> sources = procedural_sources(
        derive_stream(g.seed, 0xa1fa + 1), source_count, a.height, a.width);
    std::vector<HazeTriple> triples = generate_dataset(sources, dcfg);

    // Fixed held-out tail; every alpha trains on the same remainder with the
    // same seed, so alpha is the only moving part.
    size_t val_count = std::max<size_t>(
        1, static_cast<size_t>(std::llround(a.val_fraction *
                                            static_cast<double>(triples.size()))));
    require(val_count < triples.size(), ErrorKind::Config,
            "validation fraction leaves no training data");
    std::vector<HazeTriple> val_set(triples.end() - static_cast<int64_t>(val_count),
                                    triples.end());
    std::vector<HazeTriple> train_set(triples.begin(),
                                      triples.end() - static_cast<int64_t>(val_count));

    TrainForAlphaFn train_fn = [&](double alpha, const std::vector<HazeTriple>& val)
        -> double {
        TrainConfig cfg;
        cfg.adam.lr = a.lr;
        cfg.alpha = alpha;
        cfg.batch_size = a.batch;
        cfg.epochs = a.epochs;
        cfg.seed = g.seed;
        cfg.val_fraction = 0.0;  // the sweep holds out its own fixed set
        std::fprintf(stderr, "alpha %.3f: training %lld epochs on %zu triples\n", alpha,
                     static_cast<long long>(a.epochs), train_set.size());
        TrainResult r = train_model(train_set, cfg);
        return dehaze_mse(r.final_params, val);
    };

    AlphaSweepReport report = run_alpha_sweep(train_fn, val_set, a.alphas, g.seed);
    fs::path path = out_path(g, "alpha_sweep_seed" + std::to_string(g.seed) + ".txt");
    write_alpha_report(report, path.string());
    std::printf("%-8s %-14s %s\n", "alpha", "val_mse", "note");
    for (const AlphaSweepCell& c : report.cells)
        std::printf("%-8.3f %-14.8f %s\n", c.alpha, c.val_mse,
                    c.diverged ? "diverged" : c.label.c_str());
    std::printf("report: %s\n", path.string().c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ldt: dual-task convolutional dehazing toolkit"};
    app.require_subcommand(1);
    app.set_config("--config")
        ->description("config file (INI: option=value, [subcommand] sections)");

    GlobalArgs g;
    app.add_option("--seed", g.seed, "random seed for all stochastic work")
        ->capture_default_str();
    app.add_option("--threads", g.threads, "worker threads (results identical for any)")
        ->check(CLI::Range(1, 256))
        ->capture_default_str();
    app.add_option("--out", g.out, "output directory")->capture_default_str();

    SynthArgs sy;
    CLI::App* synth = app.add_subcommand("synth", "synthesize a hazy training dataset");
    synth->add_option("--count", sy.count, "triples to generate")->capture_default_str();
    synth->add_option("--height", sy.height, "image height")->capture_default_str();
    synth->add_option("--width", sy.width, "image width")->capture_default_str();
    synth->add_option("--sources", sy.sources, "distinct scenes")->capture_default_str();
    synth->add_option("--a-lo", sy.a_lo, "atmosphere light lower bound")
        ->capture_default_str();
    synth->add_option("--a-hi", sy.a_hi, "atmosphere light upper bound")
        ->capture_default_str();
    synth->add_option("--beta-lo", sy.beta_lo, "scattering lower bound")
        ->capture_default_str();
    synth->add_option("--beta-hi", sy.beta_hi, "scattering upper bound")
        ->capture_default_str();
    synth->add_option("--depth-max", sy.depth_max, "depth normalization peak")
        ->capture_default_str();

    TrainArgs tr;
    CLI::App* train = app.add_subcommand("train", "train a model on a synthesized dataset");
    train->add_option("--data", tr.data, "dataset directory (from synth)")->required();
    train->add_option("--epochs", tr.epochs, "training epochs")->capture_default_str();
    train->add_option("--batch", tr.batch, "mini-batch size")->capture_default_str();
    train->add_option("--alpha", tr.alpha, "transmission-task loss weight in [0,1]")
        ->capture_default_str();
    train->add_option("--lr", tr.lr, "Adam learning rate")->capture_default_str();
    train->add_option("--val-fraction", tr.val_fraction, "held-out fraction")
        ->capture_default_str();
    train->add_option("--crop", tr.crop, "random crop size (0 = full images)")
        ->capture_default_str();
    train->add_option("--clip-norm", tr.clip_norm, "global gradient-norm clip (0 = off)")
        ->capture_default_str();

    DehazeArgs dh;
    CLI::App* dehaze = app.add_subcommand("dehaze", "run the model on images");
    dehaze->add_option("--weights", dh.weights, "weight checkpoint")->required();
    dehaze->add_option("--input", dh.input, "image file or directory")->required();
    dehaze->add_flag("--trans", dh.write_trans, "also write estimated transmission maps");

    EvalArgs ev;
    CLI::App* eval = app.add_subcommand("eval", "run evaluation suites");
    eval->add_option("--weights", ev.weights, "weight checkpoint (network model)");
    eval->add_option("--model", ev.model, "network, oracle, or identity")
        ->capture_default_str();
    eval->add_option("--suite", ev.suite, "standard, are, cre, sre, nre, or all")
        ->capture_default_str();
    eval->add_option("--images", ev.images, "evaluation scene count")
        ->capture_default_str();
    eval->add_option("--height", ev.height, "scene height")->capture_default_str();
    eval->add_option("--width", ev.width, "scene width")->capture_default_str();
    eval->add_option("--a", ev.a_value, "fixed atmosphere light")->capture_default_str();
    eval->add_option("--beta", ev.beta_value, "fixed scattering coefficient")
        ->capture_default_str();
    eval->add_option("--depth-max", ev.depth_max, "depth normalization peak")
        ->capture_default_str();

    SweepArgs sw;
    CLI::App* sweep = app.add_subcommand("sweep-alpha",
                                         "train at several loss weights and compare");
    sweep->add_option("--alphas", sw.alphas, "loss weights to try")
        ->delimiter(',')
        ->capture_default_str();
    sweep->add_option("--count", sw.count, "triples to synthesize")->capture_default_str();
    sweep->add_option("--height", sw.height, "image height")->capture_default_str();
    sweep->add_option("--width", sw.width, "image width")->capture_default_str();
    sweep->add_option("--epochs", sw.epochs, "epochs per cell")->capture_default_str();
    sweep->add_option("--batch", sw.batch, "mini-batch size")->capture_default_str();
    sweep->add_option("--lr", sw.lr, "Adam learning rate")->capture_default_str();
    sweep->add_option("--val-fraction", sw.val_fraction, "held-out fraction")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        set_thread_count(g.threads);
        if (synth->parsed()) return cmd_synth(g, sy);
        if (train->parsed()) return cmd_train(g, tr);
        if (dehaze->parsed()) return cmd_dehaze(g, dh);
        if (eval->parsed()) return cmd_eval(g, ev);
        if (sweep->parsed()) return cmd_sweep_alpha(g, sw);
        std::fprintf(stderr, "ldt: error [config] no subcommand given\n");
        return 2;
    } catch (const Error& e) {
        std::fprintf(stderr, "ldt: error [%s] %s\n", error_kind_name(e.kind()), e.what());
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "ldt: error [internal] %s\n", e.what());
        return 4;
    }
}
