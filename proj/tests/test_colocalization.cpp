#include <doctest.h>

#include <map>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "oscos/colocalization.hpp"

using namespace oscos;

namespace {

DetectedObject at(std::uint32_t id, double x, double y, double z)
{
    DetectedObject o;
    o.id = id;
    o.size = 1;
    o.centroid = {x, y, z};
    return o;
}

std::vector<DetectedObject> random_objects(std::mt19937& rng, std::size_t n, std::uint32_t first_id)
{
    std::uniform_int_distribution<int> coord(0, 12);
    std::vector<DetectedObject> out;
    for (std::size_t i = 0; i < n; ++i)
        out.push_back(at(first_id + static_cast<std::uint32_t>(i), coord(rng), coord(rng), coord(rng) / 3));
    return out;
}

LabelMap random_labels(std::mt19937& rng, Dimensions d, std::uint32_t k)
{
    LabelMap m(d);
    for (auto& l : m.labels())
        l = rng() % 3 == 0 ? 1 + static_cast<std::uint32_t>(rng() % k) : 0;
    return m;
}

} // namespace

TEST_CASE("centroid colocalization")
{
    SUBCASE("identical lists pair each object with itself")
    {
        std::mt19937 rng(1);
        const auto a = random_objects(rng, 20, 1);
        const auto pairs = colocalize_by_centroid(a, a, 1.0);
        std::set<std::uint32_t> seen;
        for (const auto& p : pairs)
            seen.insert(p.id_a);
        // Coincident random points may swap partners, but every object is used once at distance 0.
        CHECK(pairs.size() == a.size());
        CHECK(seen.size() == a.size());
        for (const auto& p : pairs)
            CHECK(p.centroid_distance == 0.0);
    }
    SUBCASE("nearest candidate wins")
    {
        const std::vector<DetectedObject> a{at(1, 0, 0, 0)};
        const std::vector<DetectedObject> b{at(7, 2, 0, 0), at(8, 1, 0, 0)};
        const auto pairs = colocalize_by_centroid(a, b, 3.0);
        REQUIRE(pairs.size() == 1);
        CHECK(pairs[0].id_b == 8);
        CHECK(pairs[0].centroid_distance == 1.0);
    }
    SUBCASE("out of radius")
    {
        CHECK(colocalize_by_centroid(std::vector{at(1, 0, 0, 0)}, std::vector{at(2, 5, 0, 0)}, 4.9).empty());
    }
    SUBCASE("random lists agree with the naive greedy oracle and ignore input order")
    {
        std::mt19937 rng(2);
        for (int t = 0; t < 50; ++t) {
            auto a = random_objects(rng, 1 + rng() % 25, 1);
            auto b = random_objects(rng, 1 + rng() % 25, 100);
            const double radius = 1.0 + rng() % 5;
            std::vector<std::pair<std::uint32_t, Point3>> pa, pb;
            for (const auto& o : a)
                pa.emplace_back(o.id, o.centroid);
            for (const auto& o : b)
                pb.emplace_back(o.id, o.centroid);
            auto expect = oracle::greedy_match(pa, pb, radius);
            std::sort(expect.begin(), expect.end());
            const auto got = colocalize_by_centroid(a, b, radius);
            REQUIRE(got.size() == expect.size());
            for (std::size_t i = 0; i < got.size(); ++i) {
                REQUIRE(got[i].id_a == std::get<0>(expect[i]));
                REQUIRE(got[i].id_b == std::get<1>(expect[i]));
                REQUIRE(got[i].centroid_distance == doctest::Approx(std::get<2>(expect[i])));
            }
            std::shuffle(a.begin(), a.end(), rng);
            std::shuffle(b.begin(), b.end(), rng);
            REQUIRE(colocalize_by_centroid(a, b, radius) == got);
        }
    }
    SUBCASE("physical metric scales axes")
    {
        const auto pairs = colocalize_by_centroid(std::vector{at(1, 0, 0, 0)}, std::vector{at(2, 0, 0, 1)}, 2.5,
                                                  DistanceMetric::physical({1, 1, 3}));
        CHECK(pairs.empty());
    }
}

TEST_CASE("overlap colocalization")
{
    const Dimensions d{8, 6, 3};
    SUBCASE("disjoint maps")
    {
        LabelMap a(d), b(d);
        a[0] = 1;
        b[1] = 1;
        CHECK(colocalize_by_overlap(a, b, 1).empty());
    }
    SUBCASE("identical maps pair labels with themselves")
    {
        std::mt19937 rng(3);
        const auto m = random_labels(rng, d, 5);
        const auto pairs = colocalize_by_overlap(m, m, 1);
        std::map<std::uint32_t, std::size_t> size;
        for (auto l : m.labels())
            if (l)
                ++size[l];
        REQUIRE(pairs.size() >= size.size());
        for (const auto& p : pairs)
            if (p.id_a == p.id_b) {
                CHECK(p.overlap_voxels == size[p.id_a]);
                CHECK(p.centroid_distance == 0.0);
            }
    }
    SUBCASE("random maps match per-voxel counting and are symmetric")
    {
        std::mt19937 rng(4);
        for (int t = 0; t < 30; ++t) {
            const auto a = random_labels(rng, d, 6);
            const auto b = random_labels(rng, d, 4);
            const std::size_t min_overlap = 1 + rng() % 3;
            std::map<std::pair<std::uint32_t, std::uint32_t>, std::size_t> count;
            for (std::size_t i = 0; i < d.voxel_count(); ++i)
                if (a[i] && b[i])
                    ++count[{a[i], b[i]}];
            std::vector<std::pair<std::uint32_t, std::uint32_t>> expect;
            for (const auto& [k, n] : count)
                if (n >= min_overlap)
                    expect.push_back(k);
            const auto ab = colocalize_by_overlap(a, b, min_overlap);
            REQUIRE(ab.size() == expect.size());
            for (std::size_t i = 0; i < ab.size(); ++i) {
                REQUIRE(std::make_pair(ab[i].id_a, ab[i].id_b) == expect[i]);
                REQUIRE(ab[i].overlap_voxels == count[expect[i]]);
            }
            auto ba = colocalize_by_overlap(b, a, min_overlap);
            for (auto& p : ba)
                std::swap(p.id_a, p.id_b);
            std::sort(ba.begin(), ba.end(), [](const auto& x, const auto& y) {
                return std::tie(x.id_a, x.id_b) < std::tie(y.id_a, y.id_b);
            });
            REQUIRE(ba.size() == ab.size());
            for (std::size_t i = 0; i < ab.size(); ++i) {
                REQUIRE(ba[i].id_a == ab[i].id_a);
                REQUIRE(ba[i].overlap_voxels == ab[i].overlap_voxels);
                REQUIRE(ba[i].centroid_distance == doctest::Approx(ab[i].centroid_distance));
            }
        }
    }
    SUBCASE("errors")
    {
        CHECK_THROWS_AS(colocalize_by_overlap(LabelMap(d), LabelMap({1, 1, 1}), 1), ValidationError);
        CHECK_THROWS_AS(colocalize_by_overlap(LabelMap(d), LabelMap(d), 0), ValidationError);
    }
}

TEST_CASE("coloc csv")
{
    std::ostringstream out;
    write_coloc_csv(out, std::vector<ColocPair>{{1, 2, 0.5, 3}});
    CHECK(out.str() == "id_a,id_b,centroid_distance,overlap_voxels\n1,2,0.5000,3\n");
}
