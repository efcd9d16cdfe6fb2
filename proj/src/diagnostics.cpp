#include "hfm/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <random>
#include <stdexcept>

#include "hfm/errors.hpp"

namespace hfm {

namespace {

std::size_t class_index_of(const PrototypeSet& protos, int label) {
    for (std::size_t i = 0; i < protos.class_ids.size(); ++i)
        if (protos.class_ids[i] == label) return i;
    throw std::invalid_argument("corridor_violation_rate: label has no prototype");
}

double rate_or_zero(std::size_t violations, std::size_t total) {
    return total == 0 ? 0.0 : static_cast<double>(violations) / static_cast<double>(total);
}

} // namespace

double corridor_violation_rate(const std::vector<Trajectory>& trajectories,
                               const PrototypeSet& protos,
                               const std::vector<int>& true_labels, Curvature k,
                               std::vector<double>* per_class) {
    if (trajectories.empty())
        throw std::invalid_argument("corridor_violation_rate: no trajectories");
    if (trajectories.size() != true_labels.size())
        throw std::invalid_argument("corridor_violation_rate: label count mismatch");
    if (protos.points.empty())
        throw std::invalid_argument("corridor_violation_rate: no prototypes");

    std::vector<std::size_t> class_bad(protos.points.size(), 0);
    std::vector<std::size_t> class_total(protos.points.size(), 0);
    std::size_t bad = 0;
    std::size_t total = 0;
    for (std::size_t ti = 0; ti < trajectories.size(); ++ti) {
        const std::size_t ci = class_index_of(protos, true_labels[ti]);
        const auto& states = trajectories[ti].states;
        for (std::size_t s = 1; s < states.size(); ++s) {
            std::size_t best = 0;
            double best_d = geodesic_distance(states[s], protos.points[0], k);
            for (std::size_t p = 1; p < protos.points.size(); ++p) {
                double d = geodesic_distance(states[s], protos.points[p], k);
                if (d < best_d) {
                    best_d = d;
                    best = p;
                }
            }
            const bool violation = protos.class_ids[best] != true_labels[ti];
            total += 1;
            class_total[ci] += 1;
            if (violation) {
                bad += 1;
                class_bad[ci] += 1;
            }
        }
    }
    if (per_class) {
        per_class->assign(protos.points.size(), 0.0);
        for (std::size_t c = 0; c < protos.points.size(); ++c)
            (*per_class)[c] = rate_or_zero(class_bad[c], class_total[c]);
    }
    return rate_or_zero(bad, total);
}

double euclidean_corridor_violation_rate(
    const std::vector<EuclideanTrajectory>& trajectories,
    const std::vector<std::vector<double>>& prototypes,
    const std::vector<int>& true_labels, std::vector<double>* per_class) {
    if (trajectories.empty())
        throw std::invalid_argument("corridor_violation_rate: no trajectories");
    if (trajectories.size() != true_labels.size())
        throw std::invalid_argument("corridor_violation_rate: label count mismatch");
    if (prototypes.empty())
        throw std::invalid_argument("corridor_violation_rate: no prototypes");

    auto sq_dist = [](const std::vector<double>& a, const std::vector<double>& b) {
        double q = 0.0;
        for (std::size_t j = 0; j < a.size(); ++j) {
            double r = a[j] - b[j];
            q += r * r;
        }
        return q;
    };

    std::vector<std::size_t> class_bad(prototypes.size(), 0);
    std::vector<std::size_t> class_total(prototypes.size(), 0);
    std::size_t bad = 0;
    std::size_t total = 0;
    for (std::size_t ti = 0; ti < trajectories.size(); ++ti) {
        const int label = true_labels[ti];
        if (label < 0 || static_cast<std::size_t>(label) >= prototypes.size())
            throw std::invalid_argument("corridor_violation_rate: label has no prototype");
        const auto& states = trajectories[ti].states;
        for (std::size_t s = 1; s < states.size(); ++s) {
            std::size_t best = 0;
            double best_d = sq_dist(states[s], prototypes[0]);
            for (std::size_t p = 1; p < prototypes.size(); ++p) {
                double d = sq_dist(states[s], prototypes[p]);
                if (d < best_d) {
                    best_d = d;
                    best = p;
                }
            }
            total += 1;
            class_total[static_cast<std::size_t>(label)] += 1;
            if (static_cast<int>(best) != label) {
                bad += 1;
                class_bad[static_cast<std::size_t>(label)] += 1;
            }
        }
    }
    if (per_class) {
        per_class->assign(prototypes.size(), 0.0);
        for (std::size_t c = 0; c < prototypes.size(); ++c)
            (*per_class)[c] = rate_or_zero(class_bad[c], class_total[c]);
    }
    return rate_or_zero(bad, total);
}

namespace {

// Power iteration on a small dense PSD matrix. Restarting from a basis
// vector covers the measure-zero case of a start orthogonal to the range.
std::vector<double> power_iterate(const std::vector<std::vector<double>>& c,
                                  std::mt19937_64& rng) {
    const std::size_t d = c.size();
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> v(d);
    double n = 0.0;
    for (auto& x : v) {
        x = normal(rng);
        n += x * x;
    }
    n = std::sqrt(n);
    for (auto& x : v) x /= n;

    std::vector<double> w(d);
    for (int it = 0; it < 1000; ++it) {
        for (std::size_t i = 0; i < d; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < d; ++j) acc += c[i][j] * v[j];
            w[i] = acc;
        }
        double nw = 0.0;
        for (double x : w) nw += x * x;
        nw = std::sqrt(nw);
        if (nw < 1e-300) {
            // start landed in the null space; nudge along a basis direction
            std::fill(w.begin(), w.end(), 0.0);
            w[static_cast<std::size_t>(it) % d] = 1.0;
            nw = 1.0;
        }
        double drift = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            w[i] /= nw;
            drift = std::max(drift, std::abs(w[i] - v[i]));
        }
        v = w;
        if (drift < 1e-13) break;
    }
    return v;
}

double quad_form(const std::vector<std::vector<double>>& c, const std::vector<double>& v) {
    double acc = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < c.size(); ++j) row += c[i][j] * v[j];
        acc += v[i] * row;
    }
    return acc;
}

void fix_sign(std::vector<double>& v) {
    for (double x : v) {
        if (std::abs(x) > 1e-12) {
            if (x < 0.0)
                for (auto& y : v) y = -y;
            return;
        }
    }
}

} // namespace

std::vector<PlanarPolyline> project_polylines(const std::vector<Polyline>& polylines,
                                              unsigned long long seed) {
    std::size_t m = 0;
    std::size_t dim = 0;
    for (const auto& line : polylines)
        for (const auto& p : line) {
            if (m == 0)
                dim = p.size();
            else if (p.size() != dim)
                throw std::invalid_argument("project_polylines: ragged point dims");
            m += 1;
        }
    if (m == 0 || dim == 0)
        throw std::invalid_argument("project_polylines: no points to project");

    std::vector<double> mean(dim, 0.0);
    for (const auto& line : polylines)
        for (const auto& p : line)
            for (std::size_t j = 0; j < dim; ++j) mean[j] += p[j];
    for (auto& x : mean) x /= static_cast<double>(m);

    std::vector<std::vector<double>> cov(dim, std::vector<double>(dim, 0.0));
    for (const auto& line : polylines)
        for (const auto& p : line)
            for (std::size_t i = 0; i < dim; ++i) {
                const double ci = p[i] - mean[i];
                for (std::size_t j = 0; j < dim; ++j)
                    cov[i][j] += ci * (p[j] - mean[j]);
            }
    for (auto& row : cov)
        for (auto& x : row) x /= static_cast<double>(m);

    double trace = 0.0;
    for (std::size_t i = 0; i < dim; ++i) trace += cov[i][i];

    std::mt19937_64 rng(seed);
    std::vector<double> v1(dim, 0.0);
    std::vector<double> v2(dim, 0.0);
    if (trace < 1e-24) {
        std::cerr << "project_polylines: covariance rank < 2, "
                  << "projecting into available rank\n";
    } else {
        v1 = power_iterate(cov, rng);
        const double l1 = quad_form(cov, v1);
        auto deflated = cov;
        for (std::size_t i = 0; i < dim; ++i)
            for (std::size_t j = 0; j < dim; ++j) deflated[i][j] -= l1 * v1[i] * v1[j];
        if (dim < 2) {
            std::cerr << "project_polylines: covariance rank < 2, "
                      << "projecting into available rank\n";
        } else {
            v2 = power_iterate(deflated, rng);
            // strip any leaked v1 component before judging the residual rank
            double dot = 0.0;
            for (std::size_t j = 0; j < dim; ++j) dot += v1[j] * v2[j];
            double n2 = 0.0;
            for (std::size_t j = 0; j < dim; ++j) {
                v2[j] -= dot * v1[j];
                n2 += v2[j] * v2[j];
            }
            n2 = std::sqrt(n2);
            const double l2 = quad_form(deflated, v2);
            if (n2 < 1e-6 || l2 <= l1 * 1e-12) {
                std::cerr << "project_polylines: covariance rank < 2, "
                          << "projecting into available rank\n";
                std::fill(v2.begin(), v2.end(), 0.0);
            } else {
                for (auto& x : v2) x /= n2;
            }
        }
        fix_sign(v1);
        fix_sign(v2);
    }

    std::vector<PlanarPolyline> out;
    out.reserve(polylines.size());
    for (const auto& line : polylines) {
        PlanarPolyline proj;
        proj.reserve(line.size());
        for (const auto& p : line) {
            double a = 0.0;
            double b = 0.0;
            for (std::size_t j = 0; j < dim; ++j) {
                const double cj = p[j] - mean[j];
                a += v1[j] * cj;
                b += v2[j] * cj;
            }
            proj.push_back({a, b});
        }
        out.push_back(std::move(proj));
    }
    return out;
}

namespace {

double orient(const std::array<double, 2>& a, const std::array<double, 2>& b,
              const std::array<double, 2>& c) {
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
}

bool proper_crossing(const std::array<double, 2>& p1, const std::array<double, 2>& p2,
                     const std::array<double, 2>& q1, const std::array<double, 2>& q2) {
    const double d1 = orient(q1, q2, p1);
    const double d2 = orient(q1, q2, p2);
    const double d3 = orient(p1, p2, q1);
    const double d4 = orient(p1, p2, q2);
    const bool split_p = (d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0);
    const bool split_q = (d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0);
    return split_p && split_q;
}

} // namespace

std::size_t count_proper_crossings(const std::vector<PlanarPolyline>& polylines,
                                   const std::vector<int>& labels) {
    if (polylines.size() != labels.size())
        throw std::invalid_argument("count_proper_crossings: label count mismatch");
    std::size_t count = 0;
    for (std::size_t i = 0; i + 1 < polylines.size(); ++i)
        for (std::size_t j = i + 1; j < polylines.size(); ++j) {
            if (labels[i] == labels[j]) continue;
            const auto& a = polylines[i];
            const auto& b = polylines[j];
            for (std::size_t s = 0; s + 1 < a.size(); ++s)
                for (std::size_t t = 0; t + 1 < b.size(); ++t)
                    if (proper_crossing(a[s], a[s + 1], b[t], b[t + 1])) count += 1;
        }
    return count;
}

std::size_t projected_crossings(const std::vector<Polyline>& polylines,
                                const std::vector<int>& labels,
                                unsigned long long seed) {
    if (polylines.size() < 2)
        throw std::invalid_argument("projected_crossings: need at least two trajectories");
    if (polylines.size() != labels.size())
        throw std::invalid_argument("projected_crossings: label count mismatch");
    return count_proper_crossings(project_polylines(polylines, seed), labels);
}

std::vector<Polyline> spatial_polylines(const std::vector<Trajectory>& trajectories) {
    std::vector<Polyline> out;
    out.reserve(trajectories.size());
    for (const auto& t : trajectories) {
        Polyline line;
        line.reserve(t.states.size());
        for (const auto& s : t.states)
            line.emplace_back(s.space().begin(), s.space().end());
        out.push_back(std::move(line));
    }
    return out;
}

std::vector<Polyline> ambient_polylines(
    const std::vector<EuclideanTrajectory>& trajectories) {
    std::vector<Polyline> out;
    out.reserve(trajectories.size());
    for (const auto& t : trajectories) out.push_back(t.states);
    return out;
}

std::size_t projected_crossings(const std::vector<Trajectory>& trajectories,
                                const std::vector<int>& labels,
                                unsigned long long seed) {
    return projected_crossings(spatial_polylines(trajectories), labels, seed);
}

std::size_t projected_crossings(const std::vector<EuclideanTrajectory>& trajectories,
                                const std::vector<int>& labels,
                                unsigned long long seed) {
    return projected_crossings(ambient_polylines(trajectories), labels, seed);
}

EntanglementReport entanglement_report(const std::vector<Trajectory>& trajectories,
                                       const PrototypeSet& protos,
                                       const std::vector<int>& true_labels,
                                       Curvature k, unsigned long long seed) {
    EntanglementReport rep;
    rep.corridor_violation_rate =
        corridor_violation_rate(trajectories, protos, true_labels, k, &rep.per_class_rate);
    rep.crossing_count = trajectories.size() < 2
                             ? 0
                             : projected_crossings(trajectories, true_labels, seed);
    return rep;
}

EntanglementReport euclidean_entanglement_report(
    const std::vector<EuclideanTrajectory>& trajectories,
    const std::vector<std::vector<double>>& prototypes,
    const std::vector<int>& true_labels, unsigned long long seed) {
    EntanglementReport rep;
    rep.corridor_violation_rate = euclidean_corridor_violation_rate(
        trajectories, prototypes, true_labels, &rep.per_class_rate);
    rep.crossing_count = trajectories.size() < 2
                             ? 0
                             : projected_crossings(trajectories, true_labels, seed);
    return rep;
}

namespace {

constexpr double kPanelW = 360.0;
constexpr double kPanelH = 368.0;
constexpr double kGap = 16.0;
constexpr double kPlotPad = 20.0;  // inner margin inside a panel frame
constexpr double kTitleH = 24.0;

const char* const kPalette[10] = {
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

const char* color_for(int label) {
    int idx = label % 10;
    if (idx < 0) idx += 10;
    return kPalette[idx];
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

std::string escape_xml(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '&')
            out += "&amp;";
        else if (c == '<')
            out += "&lt;";
        else if (c == '>')
            out += "&gt;";
        else
            out += c;
    }
    return out;
}

} // namespace

void write_trajectory_svg(const std::string& path,
                          const std::vector<TrajectoryPanel>& panels) {
    const std::size_t n = panels.empty() ? 1 : panels.size();
    const double total_w = kGap + static_cast<double>(n) * (kPanelW + kGap);
    const double total_h = kPanelH + 2.0 * kGap;

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("write_trajectory_svg: cannot open " + path);

    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(total_w)
        << "\" height=\"" << fmt(total_h) << "\" viewBox=\"0 0 " << fmt(total_w) << " "
        << fmt(total_h) << "\">\n";
    out << "<rect x=\"0\" y=\"0\" width=\"" << fmt(total_w) << "\" height=\""
        << fmt(total_h) << "\" fill=\"#ffffff\"/>\n";

    for (std::size_t pi = 0; pi < panels.size(); ++pi) {
        const auto& panel = panels[pi];
        if (panel.polylines.size() != panel.labels.size())
            throw std::invalid_argument("write_trajectory_svg: label count mismatch");
        const double ox = kGap + static_cast<double>(pi) * (kPanelW + kGap);
        const double oy = kGap;

        out << "<rect x=\"" << fmt(ox) << "\" y=\"" << fmt(oy) << "\" width=\""
            << fmt(kPanelW) << "\" height=\"" << fmt(kPanelH)
            << "\" fill=\"#ffffff\" stroke=\"#444444\"/>\n";
        out << "<text x=\"" << fmt(ox + 10.0) << "\" y=\"" << fmt(oy + 16.0)
            << "\" font-family=\"sans-serif\" font-size=\"13\">"
            << escape_xml(panel.title) << "</text>\n";

        // data bounding box
        double min_x = std::numeric_limits<double>::infinity();
        double max_x = -min_x;
        double min_y = min_x;
        double max_y = -min_x;
        for (const auto& line : panel.polylines)
            for (const auto& p : line) {
                min_x = std::min(min_x, p[0]);
                max_x = std::max(max_x, p[0]);
                min_y = std::min(min_y, p[1]);
                max_y = std::max(max_y, p[1]);
            }
        if (!(min_x <= max_x)) continue; // empty panel: frame and title only

        const double plot = kPanelW - 2.0 * kPlotPad;
        const double extent = std::max(std::max(max_x - min_x, max_y - min_y), 1e-12);
        const double scale = plot / extent;
        // uniform scale, centered, so shapes keep their aspect ratio
        const double cx = 0.5 * (min_x + max_x);
        const double cy = 0.5 * (min_y + max_y);
        const double px0 = ox + kPanelW * 0.5;
        const double py0 = oy + kTitleH + (kPanelH - kTitleH) * 0.5;
        auto sx = [&](double x) { return px0 + (x - cx) * scale * 0.92; };
        auto sy = [&](double y) { return py0 - (y - cy) * scale * 0.92; };

        for (std::size_t li = 0; li < panel.polylines.size(); ++li) {
            const auto& line = panel.polylines[li];
            if (line.empty()) continue;
            const char* color = color_for(panel.labels[li]);
            if (line.size() > 1) {
                out << "<polyline fill=\"none\" stroke=\"" << color
                    << "\" stroke-width=\"1.2\" opacity=\"0.85\" points=\"";
                for (std::size_t i = 0; i < line.size(); ++i) {
                    if (i) out << ' ';
                    out << fmt(sx(line[i][0])) << ',' << fmt(sy(line[i][1]));
                }
                out << "\"/>\n";
            }
            out << "<circle cx=\"" << fmt(sx(line.front()[0])) << "\" cy=\""
                << fmt(sy(line.front()[1]))
                << "\" r=\"2\" fill=\"none\" stroke=\"" << color << "\"/>\n";
            out << "<circle cx=\"" << fmt(sx(line.back()[0])) << "\" cy=\""
                << fmt(sy(line.back()[1])) << "\" r=\"2.5\" fill=\"" << color
                << "\"/>\n";
        }
    }
    out << "</svg>\n";
    if (!out) throw IoError("write_trajectory_svg: write failed for " + path);
}

} // namespace hfm
