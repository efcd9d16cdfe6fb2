#include "hfm/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "hfm/binary_io.hpp"
#include "hfm/errors.hpp"

namespace hfm {

namespace {

double to_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

// Vertices of a regular (N-1)-simplex in R^dim, centered at the origin,
// with every pairwise distance equal to `distance`. Built from the unit
// vectors of R^N shifted to their centroid (pairwise distance sqrt 2) and
// rotated by the Householder reflection that sends the centroid direction
// onto the last axis, which then carries no information and is dropped.
std::vector<std::vector<double>> simplex_centers(std::size_t n, std::size_t dim,
                                                 double distance) {
    const double inv_n = 1.0 / static_cast<double>(n);
    const double a = 1.0 / std::sqrt(static_cast<double>(n));
    // u = centroid direction minus e_N, the Householder axis
    std::vector<double> u(n, a);
    u[n - 1] -= 1.0;
    double usq = 0.0;
    for (double c : u) usq += c * c;

    const double scale = distance / std::sqrt(2.0);
    std::vector<std::vector<double>> centers(n, std::vector<double>(dim, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> q(n, -inv_n);
        q[i] += 1.0;
        double proj = 0.0;
        for (std::size_t j = 0; j < n; ++j) proj += u[j] * q[j];
        const double f = 2.0 * proj / usq;
        for (std::size_t j = 0; j + 1 < n; ++j)
            centers[i][j] = scale * (q[j] - f * u[j]);
    }
    return centers;
}

std::vector<double> random_unit(std::mt19937_64& rng, std::size_t dim) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> d(dim);
    double nrm = 0.0;
    while (nrm < 1e-12) {
        nrm = 0.0;
        for (auto& c : d) {
            c = normal(rng);
            nrm += c * c;
        }
        nrm = std::sqrt(nrm);
    }
    for (auto& c : d) c /= nrm;
    return d;
}

} // namespace

FeatureDataset generate_synthetic(const SyntheticConfig& cfg) {
    if (cfg.n_classes < 1)
        throw std::invalid_argument("generate_synthetic: need at least one class");
    if (cfg.dim < 2) throw std::invalid_argument("generate_synthetic: dim must be >= 2");
    if (cfg.samples_per_class < 1)
        throw std::invalid_argument("generate_synthetic: need samples in every class");
    if (!(cfg.sigma > 0.0))
        throw std::invalid_argument("generate_synthetic: sigma must be positive");
    if (!(cfg.overlap >= 0.0))
        throw std::invalid_argument("generate_synthetic: overlap must be nonnegative");
    if (!(cfg.prototype_offset_sigma >= 0.0))
        throw std::invalid_argument("generate_synthetic: prototype offset must be nonnegative");
    if (cfg.dim < cfg.n_classes - 1)
        throw std::invalid_argument(
            "generate_synthetic: dim too small for equidistant class centers");

    // A single class has no center spacing to respect: its one center sits at
    // the origin and the distance/overlap settings are irrelevant.
    std::vector<std::vector<double>> centers;
    if (cfg.n_classes == 1) {
        centers.assign(1, std::vector<double>(cfg.dim, 0.0));
    } else {
        const double d_eff = cfg.center_distance - cfg.overlap * cfg.sigma;
        if (!(d_eff > 0.0))
            throw std::invalid_argument(
                "generate_synthetic: overlap swallows the whole center distance");
        centers = simplex_centers(cfg.n_classes, cfg.dim, d_eff);
    }

    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    FeatureDataset ds;
    ds.provenance = FeatureDataset::Provenance::synthetic;
    for (std::size_t c = 0; c < cfg.n_classes; ++c) {
        auto dir = random_unit(rng, cfg.dim);
        std::vector<double> proto(cfg.dim);
        const double off = cfg.prototype_offset_sigma * cfg.sigma;
        for (std::size_t j = 0; j < cfg.dim; ++j)
            proto[j] = to_f32(centers[c][j] + off * dir[j]);
        ds.prototypes.push_back(std::move(proto));
    }
    for (std::size_t c = 0; c < cfg.n_classes; ++c) {
        for (std::size_t s = 0; s < cfg.samples_per_class; ++s) {
            std::vector<double> f(cfg.dim);
            for (std::size_t j = 0; j < cfg.dim; ++j)
                f[j] = to_f32(centers[c][j] + cfg.sigma * normal(rng));
            ds.features.push_back(std::move(f));
            ds.labels.push_back(static_cast<int>(c));
        }
    }
    return ds;
}

std::pair<FeatureDataset, FeatureDataset> split_k_shot(const FeatureDataset& ds,
                                                       std::size_t k,
                                                       std::uint64_t seed) {
    if (k == 0) throw std::invalid_argument("split_k_shot: k must be positive");
    if (ds.features.size() != ds.labels.size())
        throw std::invalid_argument("split_k_shot: label count mismatch");
    const std::size_t n_classes = ds.prototypes.size();
    std::vector<std::vector<std::size_t>> by_class(n_classes);
    for (std::size_t i = 0; i < ds.labels.size(); ++i) {
        int l = ds.labels[i];
        if (l < 0 || static_cast<std::size_t>(l) >= n_classes)
            throw std::invalid_argument("split_k_shot: label out of range");
        by_class[static_cast<std::size_t>(l)].push_back(i);
    }
    for (const auto& idx : by_class)
        if (idx.size() <= k)
            throw std::invalid_argument("split_k_shot: a class has too few samples");

    std::mt19937_64 rng(seed);
    FeatureDataset support, test;
    support.prototypes = ds.prototypes;
    support.provenance = ds.provenance;
    test.prototypes = ds.prototypes;
    test.provenance = ds.provenance;
    for (auto& idx : by_class) {
        std::shuffle(idx.begin(), idx.end(), rng);
        for (std::size_t p = 0; p < idx.size(); ++p) {
            FeatureDataset& dst = p < k ? support : test;
            dst.features.push_back(ds.features[idx[p]]);
            dst.labels.push_back(ds.labels[idx[p]]);
        }
    }
    return {std::move(support), std::move(test)};
}

void write_feature_file(const std::string& path, const FeatureDataset& ds) {
    if (ds.features.size() != ds.labels.size())
        throw std::invalid_argument("write_feature_file: label count mismatch");
    if (ds.prototypes.empty())
        throw std::invalid_argument("write_feature_file: no prototypes");
    const std::size_t dim = ds.prototypes[0].size();
    for (const auto& p : ds.prototypes)
        if (p.size() != dim)
            throw std::invalid_argument("write_feature_file: ragged prototypes");
    for (const auto& f : ds.features)
        if (f.size() != dim)
            throw std::invalid_argument("write_feature_file: ragged features");

    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("write_feature_file: cannot open " + path, 0);
    io::ByteWriter w(out);
    w.magic("HFMF");
    w.u32(1);
    w.u32(static_cast<std::uint32_t>(dim));
    w.u32(static_cast<std::uint32_t>(ds.prototypes.size()));
    for (std::size_t c = 0; c < ds.prototypes.size(); ++c) {
        w.u32(static_cast<std::uint32_t>(c));
        for (double v : ds.prototypes[c]) w.f32(static_cast<float>(v));
    }
    w.u32(static_cast<std::uint32_t>(ds.features.size()));
    for (std::size_t i = 0; i < ds.features.size(); ++i) {
        w.u32(static_cast<std::uint32_t>(ds.labels[i]));
        for (double v : ds.features[i]) w.f32(static_cast<float>(v));
    }
    if (!out) throw FormatError("write_feature_file: write failed", w.offset());
}

FeatureDataset read_feature_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("read_feature_file: cannot open " + path, 0);
    io::ByteReader r(in);
    r.magic("HFMF", "read_feature_file");
    std::size_t at = r.offset();
    std::uint32_t version = r.u32("read_feature_file");
    if (version != 1)
        throw FormatError("read_feature_file: unsupported version", at);
    std::uint32_t dim = r.u32("read_feature_file");
    at = r.offset();
    std::uint32_t n_protos = r.u32("read_feature_file");
    if (dim == 0 || n_protos == 0)
        throw FormatError("read_feature_file: empty geometry header", at);

    auto read_record = [&](std::uint32_t label_bound, std::vector<double>& vec) {
        std::size_t label_at = r.offset();
        std::uint32_t label = r.u32("read_feature_file");
        if (label >= label_bound)
            throw FormatError("read_feature_file: label out of range", label_at);
        vec.resize(dim);
        for (std::uint32_t j = 0; j < dim; ++j) {
            std::size_t val_at = r.offset();
            float v = r.f32("read_feature_file");
            if (!std::isfinite(v))
                throw FormatError("read_feature_file: non-finite value", val_at);
            vec[j] = static_cast<double>(v);
        }
        return label;
    };

    FeatureDataset ds;
    ds.provenance = FeatureDataset::Provenance::ingested;
    ds.prototypes.resize(n_protos);
    std::vector<bool> seen(n_protos, false);
    for (std::uint32_t c = 0; c < n_protos; ++c) {
        std::vector<double> p;
        std::size_t at_rec = r.offset();
        std::uint32_t label = read_record(n_protos, p);
        if (seen[label])
            throw FormatError("read_feature_file: duplicate prototype label", at_rec);
        seen[label] = true;
        ds.prototypes[label] = std::move(p);
    }
    std::uint32_t n_samples = r.u32("read_feature_file");
    ds.features.resize(n_samples);
    ds.labels.resize(n_samples);
    for (std::uint32_t i = 0; i < n_samples; ++i) {
        std::vector<double> f;
        std::uint32_t label = read_record(n_protos, f);
        ds.features[i] = std::move(f);
        ds.labels[i] = static_cast<int>(label);
    }
    if (!r.at_eof())
        throw FormatError("read_feature_file: trailing bytes", r.offset());
    return ds;
}

FeatureDataset read_feature_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("read_feature_csv: cannot open " + path, 0);
    std::string line;
    std::size_t line_start = 0;
    if (!std::getline(in, line))
        throw FormatError("read_feature_csv: empty file", 0);
    // header: label,f0,...,f{n-1}
    std::vector<std::string> cols;
    {
        std::istringstream header(line);
        std::string cell;
        while (std::getline(header, cell, ',')) cols.push_back(cell);
    }
    if (cols.size() < 2 || cols[0] != "label")
        throw FormatError("read_feature_csv: bad header", 0);
    for (std::size_t j = 1; j < cols.size(); ++j)
        if (cols[j] != "f" + std::to_string(j - 1))
            throw FormatError("read_feature_csv: bad header", 0);
    const std::size_t dim = cols.size() - 1;

    FeatureDataset ds;
    ds.provenance = FeatureDataset::Provenance::ingested;
    line_start += line.size() + 1;
    int max_label = -1;
    while (std::getline(in, line)) {
        if (line.empty()) {
            line_start += 1;
            continue;
        }
        std::istringstream row(line);
        std::string cell;
        std::vector<double> vals;
        while (std::getline(row, cell, ',')) {
            try {
                std::size_t used = 0;
                double v = std::stod(cell, &used);
                if (used != cell.size()) throw std::invalid_argument(cell);
                vals.push_back(v);
            } catch (const std::exception&) {
                throw FormatError("read_feature_csv: unparsable cell", line_start);
            }
        }
        if (vals.size() != dim + 1)
            throw FormatError("read_feature_csv: wrong column count", line_start);
        double label_raw = vals[0];
        if (label_raw < 0 || label_raw != std::floor(label_raw))
            throw FormatError("read_feature_csv: bad label", line_start);
        int label = static_cast<int>(label_raw);
        std::vector<double> f(dim);
        for (std::size_t j = 0; j < dim; ++j) {
            if (!std::isfinite(vals[j + 1]))
                throw FormatError("read_feature_csv: non-finite value", line_start);
            f[j] = to_f32(vals[j + 1]);
        }
        ds.features.push_back(std::move(f));
        ds.labels.push_back(label);
        max_label = std::max(max_label, label);
        line_start += line.size() + 1;
    }
    if (ds.features.empty())
        throw FormatError("read_feature_csv: no data rows", line_start);

    const std::size_t n_classes = static_cast<std::size_t>(max_label) + 1;
    std::vector<std::size_t> counts(n_classes, 0);
    ds.prototypes.assign(n_classes, std::vector<double>(dim, 0.0));
    for (std::size_t i = 0; i < ds.features.size(); ++i) {
        std::size_t c = static_cast<std::size_t>(ds.labels[i]);
        counts[c] += 1;
        for (std::size_t j = 0; j < dim; ++j) ds.prototypes[c][j] += ds.features[i][j];
    }
    for (std::size_t c = 0; c < n_classes; ++c) {
        if (counts[c] == 0)
            throw FormatError("read_feature_csv: class without samples", 0);
        for (std::size_t j = 0; j < dim; ++j)
            ds.prototypes[c][j] = to_f32(ds.prototypes[c][j] / static_cast<double>(counts[c]));
    }
    return ds;
}

double nearest_prototype_accuracy(const std::vector<std::vector<double>>& features,
                                  const std::vector<int>& labels,
                                  const std::vector<std::vector<double>>& prototypes) {
    if (features.empty() || features.size() != labels.size())
        throw std::invalid_argument("nearest_prototype_accuracy: bad inputs");
    if (prototypes.empty())
        throw std::invalid_argument("nearest_prototype_accuracy: no prototypes");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < features.size(); ++i) {
        std::size_t best = 0;
        double best_q = -1.0;
        for (std::size_t c = 0; c < prototypes.size(); ++c) {
            double q = 0.0;
            for (std::size_t j = 0; j < features[i].size(); ++j) {
                double r = features[i][j] - prototypes[c][j];
                q += r * r;
            }
            if (best_q < 0.0 || q < best_q) {
                best_q = q;
                best = c;
            }
        }
        if (static_cast<int>(best) == labels[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(features.size());
}

} // namespace hfm
