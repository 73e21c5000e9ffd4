#include <unistd.h>

#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>
#include <vector>

#include "doctest.h"
#include "ldt/error.hpp"
#include "ldt/eval.hpp"
#include "ldt/metrics.hpp"
#include "ldt/model.hpp"
#include "ldt/scenes.hpp"

using namespace ldt;

namespace {

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& stem) {
        path = std::filesystem::temp_directory_path() /
               (stem + "-" + std::to_string(::getpid()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::string str() const { return path.string(); }
};

std::string slurp(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    REQUIRE(f.good());
    return std::string((std::istreambuf_iterator<char>(f)),
                       std::istreambuf_iterator<char>());
}

EvalSuiteConfig tiny_config() {
    EvalSuiteConfig c;
    c.a_values = {0.75, 0.92};
    c.beta_values = {0.7, 1.3};
    c.scale_factors = {1.0, 0.5};
    c.image_count = 3;
    c.seed = 9;
    return c;
}

std::vector<SourceImage> tiny_sources() { return procedural_sources(31, 3, 28, 28); }

double all_psnr(const EvalReport& r) {
    for (const EvalAggregate& a : r.aggregates)
        if (a.bucket == "all") return a.mean_psnr;
    FAIL("report has no overall aggregate");
    return 0.0;
}

}  // namespace

TEST_CASE("aggregates are exactly the bucket means of the records") {
    std::vector<SourceImage> sources = tiny_sources();
    EvalReport r = run_are(identity_model(), sources, tiny_config());

    // Independent recomputation: ordered buckets, double sums.
    std::vector<std::string> order;
    std::vector<double> mse_sum, psnr_sum, ssim_sum;
    std::vector<int64_t> count;
    for (const EvalRecord& rec : r.records) {
        size_t i = 0;
        for (; i < order.size(); ++i)
            if (order[i] == rec.bucket) break;
        if (i == order.size()) {
            order.push_back(rec.bucket);
            mse_sum.push_back(0.0);
            psnr_sum.push_back(0.0);
            ssim_sum.push_back(0.0);
            count.push_back(0);
        }
        mse_sum[i] += rec.mse;
        psnr_sum[i] += rec.psnr;
        ssim_sum[i] += rec.ssim;
        ++count[i];
    }

    REQUIRE(r.aggregates.size() == order.size() + 1);
    for (size_t i = 0; i < order.size(); ++i) {
        const EvalAggregate& a = r.aggregates[i];
        CHECK(a.bucket == order[i]);
        CHECK(a.count == count[i]);
        CHECK(a.mean_mse ==
              doctest::Approx(mse_sum[i] / static_cast<double>(count[i])).epsilon(1e-12));
        CHECK(a.mean_psnr ==
              doctest::Approx(psnr_sum[i] / static_cast<double>(count[i])).epsilon(1e-12));
    }
    const EvalAggregate& all = r.aggregates.back();
    CHECK(all.bucket == "all");
    CHECK(all.count == static_cast<int64_t>(r.records.size()));

    // And the library's own recomputation from records must reproduce the
    // stored aggregates slot for slot.
    std::vector<EvalAggregate> again = recompute_aggregates(r.records);
    REQUIRE(again.size() == r.aggregates.size());
    for (size_t i = 0; i < again.size(); ++i) {
        CHECK(again[i].bucket == r.aggregates[i].bucket);
        CHECK(again[i].count == r.aggregates[i].count);
        CHECK(again[i].mean_mse == r.aggregates[i].mean_mse);
        CHECK(again[i].mean_psnr == r.aggregates[i].mean_psnr);
        CHECK(again[i].mean_ssim == r.aggregates[i].mean_ssim);
    }
}

TEST_CASE("the same seed writes byte-identical reports") {
    std::vector<SourceImage> sources = tiny_sources();
    EvalSuiteConfig c = tiny_config();
    TempDir dir("eval-det");

    for (const char* runName : {"first", "second"}) {
        EvalReport r = run_nre(inversion_oracle_model(), sources, c);
        write_report(r, (dir.path / (std::string(runName) + ".txt")).string());
    }
    CHECK(slurp(dir.path / "first.txt") == slurp(dir.path / "second.txt"));
}

TEST_CASE("the analytic oracle beats leaving the haze in place on every suite") {
    std::vector<SourceImage> sources = tiny_sources();
    EvalSuiteConfig c = tiny_config();

    auto compare = [&](auto runner) {
        EvalReport oracle = runner(inversion_oracle_model(), sources, c);
        EvalReport naive = runner(identity_model(), sources, c);
        CHECK(all_psnr(oracle) > all_psnr(naive));
    };
    compare([](const DehazeModel& m, const std::vector<SourceImage>& s,
               const EvalSuiteConfig& cfg) { return run_are(m, s, cfg); });
    compare([](const DehazeModel& m, const std::vector<SourceImage>& s,
               const EvalSuiteConfig& cfg) { return run_cre(m, s, cfg); });
    compare([](const DehazeModel& m, const std::vector<SourceImage>& s,
               const EvalSuiteConfig& cfg) { return run_sre(m, s, cfg); });
    compare([](const DehazeModel& m, const std::vector<SourceImage>& s,
               const EvalSuiteConfig& cfg) { return run_nre(m, s, cfg); });

    std::vector<HazeTriple> triples = standard_triples(sources, c);
    EvalReport oracle = run_standard_eval(inversion_oracle_model(), triples, c);
    EvalReport naive = run_standard_eval(identity_model(), triples, c);
    CHECK(all_psnr(oracle) > all_psnr(naive));
}

TEST_CASE("identity scores equal direct hazy-versus-clear quality") {
    std::vector<SourceImage> sources = tiny_sources();
    EvalSuiteConfig c = tiny_config();
    std::vector<HazeTriple> triples = standard_triples(sources, c);
    EvalReport r = run_standard_eval(identity_model(), triples, c);

    REQUIRE(r.records.size() == triples.size());
    for (size_t i = 0; i < triples.size(); ++i) {
        QualityScore q = quality(triples[i].hazy, triples[i].clear);
        CHECK(r.records[i].mse == doctest::Approx(q.mse).epsilon(1e-15));
        CHECK(r.records[i].psnr == doctest::Approx(q.psnr).epsilon(1e-15));
        CHECK(r.records[i].ssim == doctest::Approx(q.ssim).epsilon(1e-15));
        CHECK(r.records[i].bucket == "standard");
        CHECK(r.records[i].source_id == triples[i].source_id);
    }
}

TEST_CASE("sweep suites produce one bucket per grid cell plus the overall row") {
    std::vector<SourceImage> sources = tiny_sources();
    EvalSuiteConfig c = tiny_config();

    EvalReport are = run_are(identity_model(), sources, c);
    CHECK(are.aggregates.size() == 2 + 1);
    CHECK(are.records.size() == 2 * sources.size());
    CHECK(are.aggregates[0].bucket == "a=0.75");
    CHECK(are.aggregates[1].bucket == "a=0.92");

    EvalReport cre = run_cre(identity_model(), sources, c);
    CHECK(cre.aggregates.size() == 2 + 1);
    CHECK(cre.aggregates[0].bucket == "beta=0.7");

    EvalReport sre = run_sre(identity_model(), sources, c);
    CHECK(sre.aggregates.size() == 2 + 1);
    CHECK(sre.aggregates[0].bucket == "scale=1");
    CHECK(sre.aggregates[1].bucket == "scale=0.5");

    EvalReport nre = run_nre(identity_model(), sources, c);
    CHECK(nre.aggregates.size() == 3 + 1);
    CHECK(nre.aggregates[0].bucket == "noise=gaussian:0.02");
    CHECK(nre.aggregates[1].bucket == "noise=poisson:0.01");
    CHECK(nre.aggregates[2].bucket == "noise=saltpepper:0.02");

    // The default atmosphere grid is the ten cell midpoints of (0.7, 1.0).
    EvalSuiteConfig defaults;
    std::vector<double> grid = defaults.effective_a_values();
    REQUIRE(grid.size() == 10);
    CHECK(grid.front() == doctest::Approx(0.715).epsilon(1e-12));
    CHECK(grid.back() == doctest::Approx(0.985).epsilon(1e-12));
    std::vector<double> bgrid = defaults.effective_beta_values();
    REQUIRE(bgrid.size() == 10);
    CHECK(bgrid.front() == doctest::Approx(0.55).epsilon(1e-12));
    CHECK(bgrid.back() == doctest::Approx(1.45).epsilon(1e-12));
}

TEST_CASE("a single-cell sweep matches the standard protocol's scores") {
    std::vector<SourceImage> sources = tiny_sources();
    EvalSuiteConfig c = tiny_config();
    c.a_values = {c.a_value};  // degenerate grid at the standard operating point

    EvalReport swept = run_are(identity_model(), sources, c);
    std::vector<HazeTriple> triples = standard_triples(sources, c);
    EvalReport standard = run_standard_eval(identity_model(), triples, c);

    REQUIRE(swept.records.size() == standard.records.size());
    for (size_t i = 0; i < swept.records.size(); ++i) {
        CHECK(swept.records[i].mse == standard.records[i].mse);
        CHECK(swept.records[i].psnr == standard.records[i].psnr);
        CHECK(swept.records[i].ssim == standard.records[i].ssim);
    }
}

TEST_CASE("reports survive the disk round trip exactly") {
    std::vector<SourceImage> sources = tiny_sources();
    EvalReport r = run_cre(inversion_oracle_model(), sources, tiny_config());
    r.notes.push_back("written by the round-trip test");

    TempDir dir("eval-roundtrip");
    std::string path = (dir.path / report_filename(r)).string();
    write_report(r, path);
    EvalReport back = read_report(path);

    CHECK(back.suite == r.suite);
    CHECK(back.seed == r.seed);
    CHECK(back.config_digest == r.config_digest);
    REQUIRE(back.notes.size() == r.notes.size());
    CHECK(back.notes.back() == r.notes.back());
    REQUIRE(back.records.size() == r.records.size());
    for (size_t i = 0; i < r.records.size(); ++i) {
        CHECK(back.records[i].source_id == r.records[i].source_id);
        CHECK(back.records[i].perturbation == r.records[i].perturbation);
        CHECK(back.records[i].bucket == r.records[i].bucket);
        // %.17g is lossless for doubles, so equality is exact.
        CHECK(back.records[i].mse == r.records[i].mse);
        CHECK(back.records[i].psnr == r.records[i].psnr);
        CHECK(back.records[i].ssim == r.records[i].ssim);
    }
    REQUIRE(back.aggregates.size() == r.aggregates.size());
    for (size_t i = 0; i < r.aggregates.size(); ++i) {
        CHECK(back.aggregates[i].bucket == r.aggregates[i].bucket);
        CHECK(back.aggregates[i].count == r.aggregates[i].count);
        CHECK(back.aggregates[i].mean_mse == r.aggregates[i].mean_mse);
    }

    // Aggregates recomputed from the read-back records reproduce the file's.
    std::vector<EvalAggregate> again = recompute_aggregates(back.records);
    REQUIRE(again.size() == back.aggregates.size());
    for (size_t i = 0; i < again.size(); ++i) {
        CHECK(again[i].mean_mse == back.aggregates[i].mean_mse);
        CHECK(again[i].mean_psnr == back.aggregates[i].mean_psnr);
    }
}

TEST_CASE("report filenames carry suite, seed, and configuration digest") {
    std::vector<SourceImage> sources = tiny_sources();
    EvalSuiteConfig c = tiny_config();
    c.seed = 77;
    EvalReport r = run_sre(identity_model(), sources, c);
    std::string name = report_filename(r);
    CHECK(name.substr(0, 15) == "report_sre_seed");
    CHECK(name.find("seed77_") != std::string::npos);
    CHECK(name.size() > 4);
    CHECK(name.substr(name.size() - 4) == ".txt");
    REQUIRE(r.config_digest.size() == 8);
    for (char ch : r.config_digest) CHECK(std::isxdigit(static_cast<unsigned char>(ch)));

    // The digest reacts to the configuration, not the seed.
    EvalSuiteConfig c2 = tiny_config();
    c2.seed = 78;
    EvalReport r2 = run_sre(identity_model(), sources, c2);
    CHECK(r2.config_digest == r.config_digest);
    EvalSuiteConfig c3 = tiny_config();
    c3.scale_factors = {1.0, 0.6};
    EvalReport r3 = run_sre(identity_model(), sources, c3);
    CHECK(r3.config_digest != r.config_digest);
}

TEST_CASE("malformed report files are refused") {
    TempDir dir("eval-badfile");
    auto path = dir.path / "junk.txt";
    {
        std::ofstream f(path);
        f << "something else\n";
    }
    CHECK_THROWS_AS(read_report(path.string()), Error);
    {
        std::ofstream f(path);
        f << "ldt-report v1\nwible wobble\n";
    }
    CHECK_THROWS_AS(read_report(path.string()), Error);
    CHECK_THROWS_AS(read_report((dir.path / "absent.txt").string()), Error);
}

TEST_CASE("the summary table lists every bucket") {
    std::vector<SourceImage> sources = tiny_sources();
    EvalReport r = run_are(identity_model(), sources, tiny_config());
    std::string table = summary_table(r);
    CHECK(table.find("a=0.75") != std::string::npos);
    CHECK(table.find("a=0.92") != std::string::npos);
    CHECK(table.find("all") != std::string::npos);
    CHECK(table.find("psnr") != std::string::npos);
}

TEST_CASE("a trained network plugs into the harness through a stable copy") {
    std::vector<SourceImage> sources = procedural_sources(41, 2, 16, 16);
    EvalSuiteConfig c = tiny_config();
    std::vector<HazeTriple> triples = standard_triples(sources, c);

    DehazeModel model;
    {
        LdtNetParams params = init_params(3);
        model = network_model(params);
        // Mutating the originals after construction must not leak through.
        for (auto& v : params.conv1.kernel.values()) v = 0.0f;
    }
    EvalReport r = run_standard_eval(model, triples, c);
    REQUIRE(r.records.size() == triples.size());
    for (const EvalRecord& rec : r.records) {
        CHECK(std::isfinite(rec.mse));
        CHECK(rec.psnr > 0.0);
        CHECK(rec.ssim >= -1.0);
        CHECK(rec.ssim <= 1.0);
    }
}

TEST_CASE("evaluation configuration mistakes are rejected") {
    EvalSuiteConfig c = tiny_config();
    c.a_value = 0.0;
    CHECK_THROWS_AS(c.validate(), Error);
    c = tiny_config();
    c.beta_values = {0.5, -1.0};
    CHECK_THROWS_AS(c.validate(), Error);
    c = tiny_config();
    c.scale_factors = {};
    CHECK_THROWS_AS(c.validate(), Error);
    c = tiny_config();
    c.scale_factors = {0.5, 0.0};
    CHECK_THROWS_AS(c.validate(), Error);
    c = tiny_config();
    c.noise_specs = {{NoiseKind::Gaussian, -0.1}};
    CHECK_THROWS_AS(c.validate(), Error);
    c = tiny_config();
    c.image_count = 0;
    CHECK_THROWS_AS(c.validate(), Error);
    CHECK_THROWS_AS(run_are(identity_model(), {}, tiny_config()), Error);
}

TEST_CASE("the task-weight sweep records a cell per weight in order") {
    std::vector<SourceImage> sources = procedural_sources(51, 1, 16, 16);
    EvalSuiteConfig c = tiny_config();
    std::vector<HazeTriple> val_set = standard_triples(sources, c);

    auto fake_train = [](double alpha, const std::vector<HazeTriple>& val) {
        return 0.5 - 0.1 * alpha + 0.001 * static_cast<double>(val.size());
    };
    AlphaSweepReport r =
        run_alpha_sweep(fake_train, val_set, {0.0, 0.25, 0.4, 1.0}, 5);
    CHECK(r.seed == 5);
    REQUIRE(r.cells.size() == 4);
    CHECK(r.cells[0].alpha == 0.0);
    CHECK(r.cells[0].label == "auxiliary task removed");
    CHECK(r.cells[1].label != "auxiliary task removed");
    CHECK(r.cells[3].alpha == 1.0);
    for (const auto& cell : r.cells) {
        CHECK_FALSE(cell.diverged);
        CHECK(std::isfinite(cell.val_mse));
    }
    CHECK(r.cells[0].val_mse > r.cells[3].val_mse);
}

TEST_CASE("a numeric failure marks one cell diverged and the sweep continues") {
    std::vector<SourceImage> sources = procedural_sources(52, 1, 16, 16);
    std::vector<HazeTriple> val_set = standard_triples(sources, tiny_config());

    auto exploding = [](double alpha, const std::vector<HazeTriple>&) -> double {
        if (alpha == 0.25) raise(ErrorKind::Numeric, "loss became non-finite");
        return alpha;
    };
    AlphaSweepReport r = run_alpha_sweep(exploding, val_set, {0.0, 0.25, 0.5}, 1);
    REQUIRE(r.cells.size() == 3);
    CHECK_FALSE(r.cells[0].diverged);
    CHECK(r.cells[1].diverged);
    CHECK(std::isnan(r.cells[1].val_mse));
    CHECK_FALSE(r.cells[2].diverged);
    CHECK(r.cells[2].val_mse == 0.5);

    // Anything other than a numeric failure propagates.
    auto broken = [](double, const std::vector<HazeTriple>&) -> double {
        raise(ErrorKind::Data, "missing data");
    };
    CHECK_THROWS_AS(run_alpha_sweep(broken, val_set, {0.3}, 1), Error);

    CHECK_THROWS_AS(run_alpha_sweep(exploding, val_set, {}, 1), Error);
    CHECK_THROWS_AS(run_alpha_sweep(exploding, val_set, {1.5}, 1), Error);
}

TEST_CASE("the task-weight report format names diverged cells") {
    TempDir dir("alpha-report");
    AlphaSweepReport r;
    r.seed = 3;
    r.cells.push_back({0.0, 0.41, false, "auxiliary task removed"});
    r.cells.push_back({0.4, 0.35, false, "-"});
    AlphaSweepCell bad;
    bad.alpha = 0.8;
    bad.val_mse = std::numeric_limits<double>::quiet_NaN();
    bad.diverged = true;
    bad.label = "-";
    r.cells.push_back(bad);

    auto path = dir.path / "alpha.txt";
    write_alpha_report(r, path.string());
    std::string text = slurp(path);
    CHECK(text.rfind("ldt-alpha-sweep v1\n", 0) == 0);
    CHECK(text.find("seed 3") != std::string::npos);
    CHECK(text.find("auxiliary task removed") != std::string::npos);
    CHECK(text.find("diverged") != std::string::npos);
    CHECK(text.find("cell 0.40000000000000002 0.34999999999999998 ok -") !=
          std::string::npos);
}
