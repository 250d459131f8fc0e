#pragma once

// Slow, obviously-correct reference implementations used by the tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <stack>
#include <tuple>
#include <vector>

#include "oscos/segmentation.hpp"
#include "oscos/synth.hpp"

namespace oracle {

using namespace oscos;

/// Scans every t in [0, 65535] with class 0 = {<= t} nonempty; between-class
/// variance w0*w1*(mu0-mu1)^2 in double, strict '>' keeps the smallest argmax.
inline std::uint16_t otsu_exhaustive(std::span<const std::uint64_t> h)
{
    std::uint64_t total = 0, total_sum = 0;
    for (std::size_t k = 0; k < h.size(); ++k) {
        total += h[k];
        total_sum += h[k] * k;
    }
    const double n = static_cast<double>(total);
    std::uint64_t n0 = 0, s0 = 0;
    double best = -1.0;
    std::size_t best_t = 0;
    for (std::size_t t = 0; t < h.size(); ++t) {
        n0 += h[t];
        s0 += h[t] * t;
        if (n0 == 0)
            continue;
        const std::uint64_t n1 = total - n0;
        double v = 0.0;
        if (n1 > 0) {
            const double w0 = static_cast<double>(n0) / n, w1 = static_cast<double>(n1) / n;
            const double mu0 = static_cast<double>(s0) / static_cast<double>(n0);
            const double mu1 = static_cast<double>(total_sum - s0) / static_cast<double>(n1);
            v = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
        }
        if (v > best) {
            best = v;
            best_t = t;
        }
    }
    return static_cast<std::uint16_t>(best_t);
}

/// Component id per voxel via explicit-stack flood fill over 26 neighbours; 0 = background.
inline std::vector<std::uint32_t> flood_fill(const BinaryMask& m)
{
    const Dimensions& d = m.dims;
    std::vector<std::uint32_t> comp(d.voxel_count(), 0);
    std::uint32_t next = 0;
    for (std::size_t start = 0; start < comp.size(); ++start) {
        if (!m.bits[start] || comp[start])
            continue;
        ++next;
        std::stack<std::size_t> todo;
        todo.push(start);
        comp[start] = next;
        while (!todo.empty()) {
            const Voxel v = voxel_at(d, todo.top());
            todo.pop();
            for (int dz = -1; dz <= 1; ++dz)
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        const auto x = v.x + dx, y = v.y + dy, z = v.z + dz;
                        if (!d.contains(x, y, z))
                            continue;
                        const std::size_t j = d.index(static_cast<std::size_t>(x), static_cast<std::size_t>(y),
                                                      static_cast<std::size_t>(z));
                        if (m.bits[j] && !comp[j]) {
                            comp[j] = next;
                            todo.push(j);
                        }
                    }
        }
    }
    return comp;
}

/// True when the two labelings induce the same partition of the voxels.
inline bool same_partition(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b)
{
    if (a.size() != b.size())
        return false;
    std::map<std::uint32_t, std::uint32_t> ab, ba;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if ((a[i] == 0) != (b[i] == 0))
            return false;
        if (a[i] == 0)
            continue;
        auto [it1, new1] = ab.emplace(a[i], b[i]);
        auto [it2, new2] = ba.emplace(b[i], a[i]);
        if (it1->second != b[i] || it2->second != a[i])
            return false;
    }
    return true;
}

/// Direct 2D convolution of one slice with a separable kernel expanded to k x k, clamped borders.
inline std::vector<double> convolve2d_direct(const VolumeImage& vol, std::size_t z, const std::vector<double>& k1)
{
    const Dimensions& d = vol.dims();
    const auto r = static_cast<std::ptrdiff_t>(k1.size() / 2);
    std::vector<double> out(d.slice_size(), 0.0);
    for (std::size_t y = 0; y < d.ny; ++y)
        for (std::size_t x = 0; x < d.nx; ++x) {
            double acc = 0.0;
            for (std::ptrdiff_t j = -r; j <= r; ++j)
                for (std::ptrdiff_t i = -r; i <= r; ++i) {
                    const auto sx = std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(x) - i, 0,
                                                               static_cast<std::ptrdiff_t>(d.nx) - 1);
                    const auto sy = std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(y) - j, 0,
                                                               static_cast<std::ptrdiff_t>(d.ny) - 1);
                    acc += k1[static_cast<std::size_t>(i + r)] * k1[static_cast<std::size_t>(j + r)] *
                           vol.at(static_cast<std::size_t>(sx), static_cast<std::size_t>(sy), z);
                }
            out[x + d.nx * y] = acc;
        }
    return out;
}

/// Nearest-rank percentile by sorting.
inline std::uint16_t percentile_sorted(std::vector<std::uint16_t> v, double pct)
{
    std::sort(v.begin(), v.end());
    const auto rank = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(pct / 100.0 * static_cast<double>(v.size()))));
    return v[rank - 1];
}

struct BruteStats {
    std::size_t size = 0;
    double sx = 0, sy = 0, sz = 0, total = 0;
    std::uint16_t peak = 0;
    std::int64_t xmin = 1 << 30, xmax = -1, ymin = 1 << 30, ymax = -1, zmin = 1 << 30, zmax = -1;
};

/// Per-label accumulation by visiting every voxel with three nested loops.
inline std::map<std::uint32_t, BruteStats> brute_stats(const LabelMap& map, const VolumeImage& vol)
{
    std::map<std::uint32_t, BruteStats> out;
    const Dimensions& d = map.dims();
    for (std::size_t z = 0; z < d.nz; ++z)
        for (std::size_t y = 0; y < d.ny; ++y)
            for (std::size_t x = 0; x < d.nx; ++x) {
                const auto l = map.at(x, y, z);
                if (!l)
                    continue;
                auto& s = out[l];
                const double I = vol.at(x, y, z);
                ++s.size;
                s.sx += I * static_cast<double>(x);
                s.sy += I * static_cast<double>(y);
                s.sz += I * static_cast<double>(z);
                s.total += I;
                s.peak = std::max(s.peak, vol.at(x, y, z));
                s.xmin = std::min<std::int64_t>(s.xmin, x);
                s.xmax = std::max<std::int64_t>(s.xmax, x);
                s.ymin = std::min<std::int64_t>(s.ymin, y);
                s.ymax = std::max<std::int64_t>(s.ymax, y);
                s.zmin = std::min<std::int64_t>(s.zmin, z);
                s.zmax = std::max<std::int64_t>(s.zmax, z);
            }
    return out;
}

/// Every in-object voxel with no strictly brighter in-object 26-neighbour.
inline std::vector<Voxel> all_local_maxima(const VolumeImage& vol, std::span<const std::size_t> voxels)
{
    const Dimensions& d = vol.dims();
    std::set<std::size_t> in(voxels.begin(), voxels.end());
    std::vector<Voxel> out;
    for (auto f : voxels) {
        const Voxel v = voxel_at(d, f);
        bool peak = true;
        for (int dz = -1; dz <= 1 && peak; ++dz)
            for (int dy = -1; dy <= 1 && peak; ++dy)
                for (int dx = -1; dx <= 1 && peak; ++dx) {
                    const auto x = v.x + dx, y = v.y + dy, z = v.z + dz;
                    if (!d.contains(x, y, z))
                        continue;
                    const auto j = d.index(static_cast<std::size_t>(x), static_cast<std::size_t>(y), static_cast<std::size_t>(z));
                    if (in.count(j) && vol[j] > vol[f])
                        peak = false;
                }
        if (peak)
            out.push_back(v);
    }
    return out;
}

/// The seed separation rule written out literally.
inline bool pair_ok(const Voxel& p, const Voxel& s, double d)
{
    const double dx = static_cast<double>(p.x - s.x), dy = static_cast<double>(p.y - s.y), dz = static_cast<double>(p.z - s.z);
    const double dist = std::sqrt(dx * dx + dy * dy + dz * dz);
    return dist > d || (dist > d / 2.0 && p.z == s.z);
}

/// Greedy one-to-one matching: list every admissible pair, sort by (distance, a, b), take greedily.
inline std::vector<std::tuple<std::uint32_t, std::uint32_t, double>>
greedy_match(const std::vector<std::pair<std::uint32_t, Point3>>& a, const std::vector<std::pair<std::uint32_t, Point3>>& b,
             double radius)
{
    std::vector<std::tuple<double, std::uint32_t, std::uint32_t>> all;
    for (const auto& [ia, pa] : a)
        for (const auto& [ib, pb] : b) {
            const double dist = std::sqrt((pa.x - pb.x) * (pa.x - pb.x) + (pa.y - pb.y) * (pa.y - pb.y) + (pa.z - pb.z) * (pa.z - pb.z));
            if (dist <= radius)
                all.emplace_back(dist, ia, ib);
        }
    std::sort(all.begin(), all.end());
    std::set<std::uint32_t> used_a, used_b;
    std::vector<std::tuple<std::uint32_t, std::uint32_t, double>> out;
    for (const auto& [dist, ia, ib] : all) {
        if (used_a.count(ia) || used_b.count(ib))
            continue;
        used_a.insert(ia);
        used_b.insert(ib);
        out.emplace_back(ia, ib, dist);
    }
    return out;
}

/// Nearest other centroid by checking all pairs; lowest id wins ties.
inline std::vector<std::pair<std::uint32_t, double>> all_pairs_nn(std::span<const DetectedObject> objs)
{
    std::vector<std::pair<std::uint32_t, double>> out;
    for (const auto& o : objs) {
        double best = INFINITY;
        std::uint32_t best_id = 0;
        for (const auto& p : objs) {
            if (p.id == o.id)
                continue;
            const double dist = std::sqrt((o.centroid.x - p.centroid.x) * (o.centroid.x - p.centroid.x) +
                                          (o.centroid.y - p.centroid.y) * (o.centroid.y - p.centroid.y) +
                                          (o.centroid.z - p.centroid.z) * (o.centroid.z - p.centroid.z));
            if (dist < best || (dist == best && p.id < best_id)) {
                best = dist;
                best_id = p.id;
            }
        }
        out.emplace_back(best_id, best);
    }
    return out;
}

} // namespace oracle
