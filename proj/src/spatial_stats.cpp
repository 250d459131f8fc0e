#include "oscos/spatial_stats.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>

namespace oscos {

NNReport nearest_neighbor_distances(std::span<const DetectedObject> objects, const VoxelSpacing& spacing, bool use_physical)
{
    const DistanceMetric metric = use_physical ? DistanceMetric::physical(spacing) : DistanceMetric::voxel();
    NNReport report;
    report.object_count = objects.size();
    if (!objects.empty()) {
        double size_sum = 0.0, intensity_sum = 0.0;
        for (const auto& o : objects) {
            size_sum += static_cast<double>(o.size);
            intensity_sum += o.mean_intensity;
        }
        report.mean_size = size_sum / static_cast<double>(objects.size());
        report.mean_intensity = intensity_sum / static_cast<double>(objects.size());
    }
    if (objects.size() < 2)
        return report;

    for (std::size_t i = 0; i < objects.size(); ++i) {
        NearestNeighbor nn{objects[i].id, 0, std::numeric_limits<double>::infinity()};
        for (std::size_t j = 0; j < objects.size(); ++j) {
            if (i == j)
                continue;
            const double dist = metric(objects[i].centroid, objects[j].centroid);
            if (dist < nn.distance || (dist == nn.distance && objects[j].id < nn.nn_id)) {
                nn.distance = dist;
                nn.nn_id = objects[j].id;
            }
        }
        report.neighbors.push_back(nn);
    }

    std::vector<double> d;
    d.reserve(report.neighbors.size());
    for (const auto& nn : report.neighbors)
        d.push_back(nn.distance);
    std::sort(d.begin(), d.end());
    NNSummary s;
    const double n = static_cast<double>(d.size());
    double sum = 0.0;
    for (double v : d)
        sum += v;
    s.mean = sum / n;
    s.min = d.front();
    s.max = d.back();
    const std::size_t mid = d.size() / 2;
    s.median = d.size() % 2 ? d[mid] : 0.5 * (d[mid - 1] + d[mid]);
    double ss = 0.0;
    for (double v : d)
        ss += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(ss / n);
    report.summary = s;
    return report;
}

void write_nn_csv(std::ostream& out, const NNReport& report)
{
    out << "id,nn_id,nn_distance\n" << std::fixed << std::setprecision(4);
    for (const auto& nn : report.neighbors)
        out << nn.id << ',' << nn.nn_id << ',' << nn.distance << '\n';
}

void save_nn_csv(const std::filesystem::path& path, const NNReport& report)
{
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot write " + path.string());
    write_nn_csv(out, report);
}

void write_nn_summary(std::ostream& out, const NNReport& report)
{
    out << std::fixed << std::setprecision(4);
    out << "object_count=" << report.object_count << "\nmean_size=" << report.mean_size
        << "\nmean_intensity=" << report.mean_intensity << '\n';
    if (report.summary) {
        const auto& s = *report.summary;
        out << "nn_mean=" << s.mean << "\nnn_median=" << s.median << "\nnn_min=" << s.min << "\nnn_max=" << s.max
            << "\nnn_stddev=" << s.stddev << '\n';
    }
}

} // namespace oscos
