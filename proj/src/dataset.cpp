#include "ldt/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ldt/error.hpp"
#include "ldt/image_io.hpp"
#include "ldt/rng.hpp"

namespace ldt {

namespace fs = std::filesystem;

namespace {

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string triple_stem(int64_t index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%06lld", static_cast<long long>(index));
    return buf;
}

// Smallest representable positive level of a 16-bit encode, used to lift
// quantized-to-zero transmissions back into (0,1].
constexpr float kTransmissionFloor = 1.0f / 65535.0f;

class ManifestParser {
public:
    explicit ManifestParser(const std::string& path) : path_(path), in_(path) {
        require(in_.good(), ErrorKind::Data, "cannot open manifest ", path);
    }

    bool next_line(std::istringstream& out) {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_no_;
            if (line.empty() || line[0] == '#') continue;
            out = std::istringstream(line);
            return true;
        }
        return false;
    }

    template <typename T>
    T token(std::istringstream& line, const char* what) {
        T v{};
        require(static_cast<bool>(line >> v), ErrorKind::Data,
                path_, ":", line_no_, ": expected ", what);
        return v;
    }

    void expect_word(std::istringstream& line, const char* word) {
        std::string w = token<std::string>(line, word);
        require(w == word, ErrorKind::Data,
                path_, ":", line_no_, ": expected '", word, "', got '", w, "'");
    }

    [[noreturn]] void fail(const std::string& why) {
        raise(ErrorKind::Data, path_, ":", line_no_, ": ", why);
    }

private:
    std::string path_;
    std::ifstream in_;
    int64_t line_no_ = 0;
};

}  // namespace

void DatasetConfig::validate() const {
    require(count >= 0, ErrorKind::Config, "dataset count must be non-negative, got ",
            count);
    require(height >= 8 && width >= 8, ErrorKind::Config,
            "dataset extents must be at least 8x8, got ", height, "x", width);
    require(std::isfinite(a_lo) && std::isfinite(a_hi) && 0.0 < a_lo && a_lo < a_hi &&
                a_hi <= 1.0,
            ErrorKind::Config, "atmosphere range (", a_lo, ",", a_hi,
            ") must satisfy 0 < lo < hi <= 1");
    require(std::isfinite(beta_lo) && std::isfinite(beta_hi) && 0.0 < beta_lo &&
                beta_lo < beta_hi,
            ErrorKind::Config, "scattering range (", beta_lo, ",", beta_hi,
            ") must satisfy 0 < lo < hi");
    require(std::isfinite(depth_max) && depth_max > 0.0, ErrorKind::Config,
            "depth_max must be positive, got ", depth_max);
}

DepthMap normalize_depth(const DepthMap& depth, double depth_max) {
    require(std::isfinite(depth_max) && depth_max > 0.0, ErrorKind::Domain,
            "depth_max must be positive, got ", depth_max);
    float peak = 0.0f;
    for (float v : depth.values.values()) peak = std::max(peak, v);
    Tensor scaled(depth.values.shape());
    if (peak > 0.0f) {
        double k = depth_max / static_cast<double>(peak);
        const float* in = depth.values.data();
        float* out = scaled.data();
        for (int64_t i = 0; i < scaled.shape().count(); ++i)
            out[i] = static_cast<float>(k * static_cast<double>(in[i]));
    }
    return DepthMap{std::move(scaled)};
}

HazeTriple synthesize_triple(const SourceImage& source, const DatasetConfig& config,
                             uint64_t index) {
    config.validate();
    uint64_t stream = derive_stream(config.seed, index);
    Rng rng(stream);
    HazeTriple t;
    t.clear = resize_image(source.clear, config.height, config.width);
    // Resampling is convex so [0,1] survives, but pin it against float
    // rounding before domain checks downstream.
    for (float& v : t.clear.values()) v = std::min(1.0f, std::max(0.0f, v));
    DepthMap depth = DepthMap::from_tensor(
        resize_image(source.depth.values, config.height, config.width));
    depth = normalize_depth(depth, config.depth_max);
    t.params.a = rng.uniform_open(config.a_lo, config.a_hi);
    t.params.beta = rng.uniform_open(config.beta_lo, config.beta_hi);
    t.transmission = transmission_from_depth(depth, t.params.beta);
    t.hazy = apply_haze(t.clear, t.transmission, t.params.a);
    t.stream_seed = stream;
    t.source_id = source.id;
    return t;
}

std::vector<HazeTriple> generate_dataset(const std::vector<SourceImage>& sources,
                                         const DatasetConfig& config) {
    config.validate();
    require(!sources.empty(), ErrorKind::Config, "no source images given");
    std::vector<HazeTriple> out;
    out.reserve(static_cast<size_t>(config.count));
    for (int64_t i = 0; i < config.count; ++i)
        out.push_back(synthesize_triple(sources[static_cast<size_t>(i) % sources.size()],
                                        config, static_cast<uint64_t>(i)));
    return out;
}

void save_dataset(const std::string& dir, const std::vector<HazeTriple>& triples,
                  const DatasetConfig& config) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    require(!ec, ErrorKind::Data, "cannot create dataset directory ", dir, ": ",
            ec.message());

    std::ostringstream manifest;
    manifest << "ldt-dataset v1\n";
    manifest << "config count " << triples.size() << " height " << config.height
             << " width " << config.width << " a_range " << fmt_double(config.a_lo) << ' '
             << fmt_double(config.a_hi) << " beta_range " << fmt_double(config.beta_lo)
             << ' ' << fmt_double(config.beta_hi) << " depth_max "
             << fmt_double(config.depth_max) << " seed " << config.seed << "\n";

    for (size_t i = 0; i < triples.size(); ++i) {
        const HazeTriple& t = triples[i];
        std::string stem = triple_stem(static_cast<int64_t>(i));
        std::string clear_name = stem + "_clear.png";
        std::string hazy_name = stem + "_hazy.png";
        std::string trans_name = stem + "_trans.png";
        std::string depth_name = stem + "_depth.png";
        save_image(t.clear, (fs::path(dir) / clear_name).string(), 8);
        save_image(t.hazy, (fs::path(dir) / hazy_name).string(), 8);
        save_image(t.transmission, (fs::path(dir) / trans_name).string(), 16);
        // Depth is stored as d / depth_max, recovered from the transmission
        // so the pair stays consistent however the triple was produced.
        Tensor depth(t.transmission.shape());
        {
            const float* tr = t.transmission.data();
            float* d = depth.data();
            double k = 1.0 / (t.params.beta * config.depth_max);
            for (int64_t j = 0; j < depth.shape().count(); ++j) {
                double v = -std::log(static_cast<double>(tr[j])) * k;
                d[j] = static_cast<float>(std::min(1.0, std::max(0.0, v)));
            }
        }
        save_image(depth, (fs::path(dir) / depth_name).string(), 16);
        manifest << "triple " << i << ' ' << clear_name << ' ' << hazy_name << ' '
                 << trans_name << ' ' << depth_name << " a " << fmt_double(t.params.a)
                 << " beta " << fmt_double(t.params.beta) << " stream " << t.stream_seed
                 << " source " << t.source_id << "\n";
    }

    fs::path final_path = fs::path(dir) / "manifest.txt";
    fs::path tmp_path = fs::path(dir) / "manifest.txt.tmp";
    {
        std::ofstream out(tmp_path, std::ios::binary | std::ios::trunc);
        require(out.good(), ErrorKind::Data, "cannot write ", tmp_path.string());
        out << manifest.str();
        out.flush();
        require(out.good(), ErrorKind::Data, "write failed for ", tmp_path.string());
    }
    fs::rename(tmp_path, final_path, ec);
    require(!ec, ErrorKind::Data, "cannot finalize ", final_path.string(), ": ",
            ec.message());
}

LoadedDataset load_dataset(const std::string& dir) {
    fs::path manifest_path = fs::path(dir) / "manifest.txt";
    ManifestParser p(manifest_path.string());
    std::istringstream line;

    require(p.next_line(line), ErrorKind::Data, "manifest is empty: ",
            manifest_path.string());
    std::string magic, version;
    line >> magic >> version;
    require(magic == "ldt-dataset" && version == "v1", ErrorKind::Format,
            "unrecognized manifest header in ", manifest_path.string());

    require(p.next_line(line), ErrorKind::Data, "manifest has no config line");
    LoadedDataset ds;
    DatasetConfig& c = ds.config;
    p.expect_word(line, "config");
    p.expect_word(line, "count");
    int64_t count = p.token<int64_t>(line, "triple count");
    p.expect_word(line, "height");
    c.height = p.token<int64_t>(line, "height");
    p.expect_word(line, "width");
    c.width = p.token<int64_t>(line, "width");
    p.expect_word(line, "a_range");
    c.a_lo = p.token<double>(line, "a_lo");
    c.a_hi = p.token<double>(line, "a_hi");
    p.expect_word(line, "beta_range");
    c.beta_lo = p.token<double>(line, "beta_lo");
    c.beta_hi = p.token<double>(line, "beta_hi");
    p.expect_word(line, "depth_max");
    c.depth_max = p.token<double>(line, "depth_max");
    p.expect_word(line, "seed");
    c.seed = p.token<uint64_t>(line, "seed");
    c.count = count;
    c.validate();

    ds.triples.reserve(static_cast<size_t>(count));
    while (p.next_line(line)) {
        p.expect_word(line, "triple");
        int64_t index = p.token<int64_t>(line, "triple index");
        require(index == static_cast<int64_t>(ds.triples.size()), ErrorKind::Data,
                "triple indices out of order at ", index);
        std::string clear_name = p.token<std::string>(line, "clear file");
        std::string hazy_name = p.token<std::string>(line, "hazy file");
        std::string trans_name = p.token<std::string>(line, "transmission file");
        std::string depth_name = p.token<std::string>(line, "depth file");
        HazeTriple t;
        p.expect_word(line, "a");
        t.params.a = p.token<double>(line, "atmosphere value");
        p.expect_word(line, "beta");
        t.params.beta = p.token<double>(line, "scattering value");
        p.expect_word(line, "stream");
        t.stream_seed = p.token<uint64_t>(line, "stream seed");
        p.expect_word(line, "source");
        t.source_id = p.token<std::string>(line, "source id");
        t.params.validate();

        t.clear = load_image((fs::path(dir) / clear_name).string());
        t.hazy = load_image((fs::path(dir) / hazy_name).string());
        t.transmission = load_image((fs::path(dir) / trans_name).string());
        const Shape& cs = t.clear.shape();
        require(cs.h == c.height && cs.w == c.width && cs.c == 3, ErrorKind::Data,
                clear_name, ": extents ", cs.str(), " do not match manifest");
        require(t.hazy.shape() == cs, ErrorKind::Data, hazy_name,
                ": extents do not match clear image");
        const Shape& ts = t.transmission.shape();
        require(ts.h == cs.h && ts.w == cs.w && ts.c == 1, ErrorKind::Data, trans_name,
                ": expected one-channel ", c.height, "x", c.width, ", got ", ts.str());
        Tensor depth = load_image((fs::path(dir) / depth_name).string());
        require(depth.shape() == ts, ErrorKind::Data, depth_name,
                ": extents do not match transmission");
        // 16-bit quantization can floor tiny transmissions to zero; lift them
        // so the (0,1] contract holds for downstream consumers.
        for (float& v : t.transmission.values()) v = std::max(v, kTransmissionFloor);
        ds.triples.push_back(std::move(t));
    }
    require(static_cast<int64_t>(ds.triples.size()) == count, ErrorKind::Data,
            "manifest promises ", count, " triples, found ", ds.triples.size());
    return ds;
}

}  // namespace ldt
