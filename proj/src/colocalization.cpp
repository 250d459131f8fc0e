#include "oscos/colocalization.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <map>
#include <tuple>

namespace oscos {

std::vector<ColocPair> colocalize_by_centroid(std::span<const DetectedObject> a, std::span<const DetectedObject> b,
                                              double radius, const DistanceMetric& metric)
{
    if (!(radius > 0.0))
        throw ValidationError("colocalization radius must be positive");

    struct Candidate {
        double dist;
        std::uint32_t id_a, id_b;
        std::size_t ia, ib;
    };
    std::vector<Candidate> candidates;
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) {
            const double dist = metric(a[i].centroid, b[j].centroid);
            if (dist <= radius)
                candidates.push_back({dist, a[i].id, b[j].id, i, j});
        }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& x, const Candidate& y) {
        return std::tie(x.dist, x.id_a, x.id_b) < std::tie(y.dist, y.id_a, y.id_b);
    });

    std::vector<std::uint8_t> used_a(a.size(), 0), used_b(b.size(), 0);
    std::vector<ColocPair> out;
    for (const auto& c : candidates) {
        if (used_a[c.ia] || used_b[c.ib])
            continue;
        used_a[c.ia] = used_b[c.ib] = 1;
        out.push_back({c.id_a, c.id_b, c.dist, 0});
    }
    std::sort(out.begin(), out.end(), [](const ColocPair& x, const ColocPair& y) {
        return std::tie(x.id_a, x.id_b) < std::tie(y.id_a, y.id_b);
    });
    return out;
}

namespace {

std::map<std::uint32_t, Point3> geometric_centroids(const LabelMap& map)
{
    std::map<std::uint32_t, std::pair<Point3, std::size_t>> acc;
    const auto labels = map.labels();
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (!labels[i])
            continue;
        const Voxel v = voxel_at(map.dims(), i);
        auto& [p, n] = acc[labels[i]];
        p.x += static_cast<double>(v.x);
        p.y += static_cast<double>(v.y);
        p.z += static_cast<double>(v.z);
        ++n;
    }
    std::map<std::uint32_t, Point3> out;
    for (const auto& [label, pn] : acc) {
        const double n = static_cast<double>(pn.second);
        out[label] = {pn.first.x / n, pn.first.y / n, pn.first.z / n};
    }
    return out;
}

} // namespace

std::vector<ColocPair> colocalize_by_overlap(const LabelMap& a, const LabelMap& b, std::size_t min_overlap,
                                             const DistanceMetric& metric)
{
    if (!(a.dims() == b.dims()))
        throw ValidationError("label maps have different dimensions");
    if (min_overlap < 1)
        throw ValidationError("min_overlap must be >= 1");

    std::map<std::pair<std::uint32_t, std::uint32_t>, std::size_t> counts;
    const auto la = a.labels();
    const auto lb = b.labels();
    for (std::size_t i = 0; i < la.size(); ++i)
        if (la[i] && lb[i])
            ++counts[{la[i], lb[i]}];

    const auto ca = geometric_centroids(a);
    const auto cb = geometric_centroids(b);
    std::vector<ColocPair> out;
    for (const auto& [key, n] : counts) {
        if (n < min_overlap)
            continue;
        out.push_back({key.first, key.second, metric(ca.at(key.first), cb.at(key.second)), n});
    }
    return out;
}

void write_coloc_csv(std::ostream& out, std::span<const ColocPair> pairs)
{
    out << "id_a,id_b,centroid_distance,overlap_voxels\n" << std::fixed << std::setprecision(4);
    for (const auto& p : pairs)
        out << p.id_a << ',' << p.id_b << ',' << p.centroid_distance << ',' << p.overlap_voxels << '\n';
}

void save_coloc_csv(const std::filesystem::path& path, std::span<const ColocPair> pairs)
{
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot write " + path.string());
    write_coloc_csv(out, pairs);
}

} // namespace oscos
