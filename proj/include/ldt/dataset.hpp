#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ldt/haze.hpp"
#include "ldt/scenes.hpp"

namespace ldt {

struct DatasetConfig {
    int64_t count = 200;
    int64_t height = 64;
    int64_t width = 64;
    double a_lo = 0.7;
    double a_hi = 1.0;
    double beta_lo = 0.5;
    double beta_hi = 1.5;
    double depth_max = 5.0;  // depth maps are rescaled so their max hits this
    uint64_t seed = 1;

    void validate() const;
};

// Depth rescaled so max(depth) == depth_max (all-zero maps stay zero).
DepthMap normalize_depth(const DepthMap& depth, double depth_max);

// One triple from one source: resize to target extents, normalize depth,
// sample (A, beta) from the open configured ranges, synthesize.
// index picks the per-triple random stream.
HazeTriple synthesize_triple(const SourceImage& source, const DatasetConfig& config,
                             uint64_t index);

// count triples; sources are cycled through in order so each contributes
// about equally, with per-triple parameters still independent.
std::vector<HazeTriple> generate_dataset(const std::vector<SourceImage>& sources,
                                         const DatasetConfig& config);

// Disk layout: <dir>/manifest.txt plus per-triple images
//   <dir>/<index>_clear.png  8-bit RGB
//   <dir>/<index>_hazy.png   8-bit RGB
//   <dir>/<index>_trans.png  16-bit gray
//   <dir>/<index>_depth.png  16-bit gray, depth / depth_max
// The manifest is line oriented: a version line, one config line, then one
// line per triple with its files, parameters, stream seed, and source id.
void save_dataset(const std::string& dir, const std::vector<HazeTriple>& triples,
                  const DatasetConfig& config);

struct LoadedDataset {
    DatasetConfig config;
    std::vector<HazeTriple> triples;
};

LoadedDataset load_dataset(const std::string& dir);

}  // namespace ldt
