#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace hfm {

// Synthetic cluster generator settings. Class centers form an exact regular
// simplex with pairwise distance center_distance - overlap * sigma, so the
// overlap factor pushes the 1-sigma shells into each other in units of the
// cluster spread.
struct SyntheticConfig {
    std::size_t n_classes = 8;
    std::size_t dim = 16;
    std::size_t samples_per_class = 24;
    double sigma = 0.3;
    double center_distance = 2.0;
    double overlap = 0.0;
    double prototype_offset_sigma = 0.1; // prototype = center + this * sigma
                                         // along a seeded random direction
    std::uint64_t seed = 0;
};

struct FeatureDataset {
    enum class Provenance { synthetic, ingested };
    std::vector<std::vector<double>> features;
    std::vector<int> labels;
    std::vector<std::vector<double>> prototypes; // indexed by class id
    Provenance provenance = Provenance::synthetic;
};

// Draws N Gaussian clusters around exact simplex centers. All emitted values
// are representable in IEEE binary32, so writing the dataset to a feature
// file and reading it back reproduces it bit for bit. Draw order from one
// mt19937_64(seed): first every prototype offset direction (drawn even when
// the offset factor is zero, keeping the stream layout fixed), then samples
// class by class. Throws invalid_argument when the geometry is infeasible
// (dim < n_classes - 1, or the effective center distance is not positive).
// A single class is allowed: its center is the origin and the spacing
// settings are ignored.
FeatureDataset generate_synthetic(const SyntheticConfig& cfg);

// Splits exactly k support samples per class from the rest; shuffles within
// each class with mt19937_64(seed). Every class must have more than k
// samples.
std::pair<FeatureDataset, FeatureDataset> split_k_shot(const FeatureDataset& ds,
                                                       std::size_t k,
                                                       std::uint64_t seed);

// Binary feature interchange file, little-endian: magic "HFMF", version
// u32 = 1, dim u32, prototype-count u32, prototype records, sample-count
// u32, sample records; every record is a label u32 followed by dim binary32
// values. Read errors carry the byte offset of the offending field;
// non-finite values are rejected.
void write_feature_file(const std::string& path, const FeatureDataset& ds);
FeatureDataset read_feature_file(const std::string& path);

// CSV ingestion with header row label,f0,...,f{n-1}. Labels must cover
// 0..N-1 with every class nonempty; prototypes are the per-class feature
// means. Values are quantized to binary32 like everything else.
FeatureDataset read_feature_csv(const std::string& path);

// Fraction of features whose nearest prototype (Euclidean, ties to the
// lowest class id) carries their own label.
double nearest_prototype_accuracy(const std::vector<std::vector<double>>& features,
                                  const std::vector<int>& labels,
                                  const std::vector<std::vector<double>>& prototypes);

} // namespace hfm
