#include <doctest.h>

#include <numeric>
#include <random>

#include "oracles.hpp"
#include "oscos/preprocess.hpp"

using namespace oscos;

namespace {

VolumeImage from_values(Dimensions d, std::vector<std::uint16_t> v)
{
    return VolumeImage(d, {}, std::move(v));
}

Histogram random_histogram(std::mt19937_64& rng)
{
    Histogram h(kHistogramBins, 0);
    const int shape = static_cast<int>(rng() % 4);
    const int populated = 1 + static_cast<int>(rng() % 300);
    for (int i = 0; i < populated; ++i) {
        std::size_t bin = 0;
        switch (shape) {
        case 0: bin = rng() % kHistogramBins; break;                  // anywhere
        case 1: bin = 9900 + rng() % 200; break;                      // narrow band
        case 2: bin = (rng() % 2 ? 1000 : 40000) + rng() % 50; break; // bimodal
        default: bin = rng() % 8; break;                              // few low bins
        }
        h[bin] += 1 + rng() % 1000;
    }
    return h;
}

} // namespace

TEST_CASE("params validation")
{
    PreprocessParams p;
    CHECK_NOTHROW(validate(p));
    p.c2 = 0.0;
    CHECK_THROWS_AS(validate(p), ValidationError);
    p = {};
    p.sigma_xy = -1;
    CHECK_THROWS_AS(validate(p), ValidationError);
    p = {};
    p.clip_low_pct = 50;
    p.clip_high_pct = 50;
    CHECK_THROWS_AS(validate(p), ValidationError);
}

TEST_CASE("gaussian kernel")
{
    CHECK(gaussian_kernel(0.0) == std::vector<double>{1.0});
    const auto k = gaussian_kernel(1.0);
    CHECK(k.size() == 7);
    CHECK(std::accumulate(k.begin(), k.end(), 0.0) == doctest::Approx(1.0));
    CHECK(k[3] > k[2]);
    CHECK(k[2] == doctest::Approx(k[4]));
    CHECK(gaussian_kernel(1.2).size() == 2 * 4 + 1);
}

TEST_CASE("gaussian_smooth")
{
    SUBCASE("zero sigma is the identity")
    {
        std::mt19937 rng(1);
        std::vector<std::uint16_t> v(4 * 5 * 3);
        for (auto& x : v)
            x = static_cast<std::uint16_t>(rng());
        const auto vol = from_values({4, 5, 3}, v);
        CHECK(gaussian_smooth(vol, 0, 0) == vol);
    }
    SUBCASE("constants are preserved")
    {
        const VolumeImage vol({9, 7, 5}, {}, std::uint16_t{500});
        CHECK(gaussian_smooth(vol, 1.5, 0.7) == vol);
    }
    SUBCASE("single bright voxel matches a direct 2D convolution")
    {
        std::vector<std::uint16_t> v(15 * 15, 0);
        v[7 + 15 * 7] = 60000;
        const auto vol = from_values({15, 15, 1}, v);
        const auto out = gaussian_smooth(vol, 1.0, 0.0);
        const auto ref = oracle::convolve2d_direct(vol, 0, gaussian_kernel(1.0));
        for (std::size_t i = 0; i < ref.size(); ++i)
            REQUIRE(std::abs(static_cast<double>(out[i]) - ref[i]) <= 0.5 + 1e-9);
    }
    SUBCASE("interior signal keeps its total within the rounding bound")
    {
        std::vector<std::uint16_t> v(21 * 21 * 9, 100);
        v[10 + 21 * (10 + 21 * 4)] = 50000;
        v[11 + 21 * (9 + 21 * 4)] = 20000;
        const auto vol = from_values({21, 21, 9}, v);
        const auto out = gaussian_smooth(vol, 1.0, 0.8);
        double a = 0, b = 0;
        for (std::size_t i = 0; i < v.size(); ++i) {
            a += vol[i];
            b += out[i];
        }
        CHECK(std::abs(a - b) <= 0.5 * static_cast<double>(v.size()));
    }
    SUBCASE("negative sigma")
    {
        CHECK_THROWS_AS(gaussian_smooth(VolumeImage({1, 1, 1}, {}, std::uint16_t{0}), -1, 0), ValidationError);
    }
}

TEST_CASE("percentile matches a sort-based oracle")
{
    std::mt19937 rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        const Dimensions d{1 + rng() % 10, 1 + rng() % 10, 1 + rng() % 3};
        std::vector<std::uint16_t> v(d.voxel_count());
        for (auto& x : v)
            x = static_cast<std::uint16_t>(rng() % 500);
        const auto vol = from_values(d, v);
        for (double p : {0.0, 1.0, 10.0, 33.3, 50.0, 90.0, 99.9, 100.0})
            REQUIRE(percentile(vol, p) == oracle::percentile_sorted(v, p));
    }
}

TEST_CASE("clip")
{
    SUBCASE("0..100 is the identity")
    {
        const auto vol = from_values({5, 1, 1}, {4, 1, 9, 0, 65535});
        CHECK(clip(vol, 0, 100) == vol);
    }
    SUBCASE("ramp clipped at 10/90")
    {
        std::vector<std::uint16_t> v;
        for (std::uint16_t i = 0; i < 10; ++i)
            v.push_back(static_cast<std::uint16_t>(10 * i));
        const auto vol = from_values({10, 1, 1}, v);
        const auto out = clip(vol, 10, 90);
        const auto lo = oracle::percentile_sorted(v, 10), hi = oracle::percentile_sorted(v, 90);
        CHECK(lo == 0);
        CHECK(hi == 80);
        CHECK(*std::min_element(out.voxels().begin(), out.voxels().end()) == lo);
        CHECK(*std::max_element(out.voxels().begin(), out.voxels().end()) == hi);
    }
    SUBCASE("constant volume unchanged")
    {
        const VolumeImage vol({4, 4, 2}, {}, std::uint16_t{77});
        CHECK(clip(vol, 20, 70) == vol);
    }
    SUBCASE("idempotent")
    {
        std::mt19937 rng(9);
        std::vector<std::uint16_t> v(300);
        for (auto& x : v)
            x = static_cast<std::uint16_t>(rng());
        const auto vol = from_values({10, 10, 3}, v);
        const auto once = clip(vol, 5, 95);
        CHECK(clip(once, 5, 95) == once);
    }
}

TEST_CASE("otsu_threshold")
{
    Histogram h(kHistogramBins, 0);
    SUBCASE("single populated bin")
    {
        h[100] = 42;
        CHECK(otsu_threshold(h) == 100);
    }
    SUBCASE("two equal bins pick the smallest maximiser")
    {
        h[10] = 5;
        h[200] = 5;
        CHECK(otsu_threshold(h) == 10);
        CHECK(oracle::otsu_exhaustive(h) == 10);
    }
    SUBCASE("empty histogram")
    {
        CHECK_THROWS_AS(otsu_threshold(h), ValidationError);
    }
    SUBCASE("wrong size")
    {
        CHECK_THROWS_AS(otsu_threshold(Histogram(10, 1)), ValidationError);
    }
    SUBCASE("random histograms agree with the exhaustive scan")
    {
        std::mt19937_64 rng(11);
        for (int i = 0; i < 200; ++i) {
            const Histogram r = random_histogram(rng);
            REQUIRE(otsu_threshold(r) == oracle::otsu_exhaustive(r));
        }
    }
}

TEST_CASE("binarize_per_slice")
{
    SUBCASE("huge c2 leaves nothing")
    {
        std::vector<std::uint16_t> v{0, 65535, 100, 3000};
        CHECK(binarize_per_slice(from_values({2, 2, 1}, v), 1e6).count() == 0);
    }
    SUBCASE("each slice gets its own threshold")
    {
        // slice 0 bimodal at {10,200}, slice 1 bimodal at {10,50}
        const auto vol = from_values({4, 1, 2}, {10, 10, 200, 200, 10, 10, 50, 50});
        const auto t = slice_thresholds(vol, 1.0);
        CHECK(t[0] == oracle::otsu_exhaustive(histogram(vol.slice(0))));
        CHECK(t[1] == oracle::otsu_exhaustive(histogram(vol.slice(1))));
        CHECK(t[0] == 10.0);
        CHECK(t[1] == 10.0);
        // Otsu puts t on the lower mode, so with c2 = 1 the ">=" keeps it as well.
        const auto m = binarize_per_slice(vol, 1.0);
        CHECK(m.bits[6] == 1);
        CHECK(m.bits[7] == 1);
        CHECK(binarize_per_slice(vol, 1.0001).bits == std::vector<std::uint8_t>{0, 0, 1, 1, 0, 0, 1, 1});
    }
    SUBCASE("constant slice floods when c2 <= 1 and stays empty above 1")
    {
        const VolumeImage vol({3, 3, 1}, {}, std::uint16_t{10000});
        CHECK(binarize_per_slice(vol, 1.0).count() == 9);
        CHECK(binarize_per_slice(vol, 1.0001).count() == 0);
    }
    SUBCASE("raising c2 never grows the mask")
    {
        std::mt19937 rng(5);
        std::vector<std::uint16_t> v(16 * 16 * 4);
        for (auto& x : v)
            x = static_cast<std::uint16_t>(9000 + rng() % 2000);
        const auto vol = from_values({16, 16, 4}, v);
        std::size_t prev = SIZE_MAX;
        for (double c2 : {0.5, 0.9, 1.0, 1.0001, 1.01, 1.1, 2.0}) {
            const auto n = binarize_per_slice(vol, c2).count();
            CHECK(n <= prev);
            prev = n;
        }
    }
    SUBCASE("slice order does not matter")
    {
        std::mt19937 rng(6);
        const Dimensions d{8, 8, 5};
        std::vector<std::uint16_t> v(d.voxel_count());
        for (auto& x : v)
            x = static_cast<std::uint16_t>(rng() % 4000);
        const std::vector<std::size_t> perm{3, 0, 4, 1, 2};
        std::vector<std::uint16_t> w(v.size());
        for (std::size_t z = 0; z < d.nz; ++z)
            std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(perm[z] * d.slice_size()), d.slice_size(),
                        w.begin() + static_cast<std::ptrdiff_t>(z * d.slice_size()));
        const auto a = binarize_per_slice(from_values(d, v), 1.0);
        const auto b = binarize_per_slice(from_values(d, w), 1.0);
        for (std::size_t z = 0; z < d.nz; ++z)
            for (std::size_t i = 0; i < d.slice_size(); ++i)
                REQUIRE(b.bits[z * d.slice_size() + i] == a.bits[perm[z] * d.slice_size() + i]);
    }
    SUBCASE("threads do not change the result")
    {
        std::mt19937 rng(8);
        std::vector<std::uint16_t> v(32 * 32 * 7);
        for (auto& x : v)
            x = static_cast<std::uint16_t>(rng());
        const auto vol = from_values({32, 32, 7}, v);
        CHECK(binarize_per_slice(vol, 1.0, 1) == binarize_per_slice(vol, 1.0, 4));
    }
}

TEST_CASE("condition applies smoothing then clipping")
{
    std::mt19937 rng(2);
    std::vector<std::uint16_t> v(10 * 10 * 3);
    for (auto& x : v)
        x = static_cast<std::uint16_t>(rng() % 1000);
    const auto vol = from_values({10, 10, 3}, v);
    PreprocessParams p;
    p.sigma_xy = 1.0;
    p.clip_low_pct = 20;
    p.clip_high_pct = 80;
    CHECK(condition(vol, p) == clip(gaussian_smooth(vol, 1.0, 0.0), 20, 80));
    p = {};
    p.clip_low_pct = 0;
    CHECK(condition(vol, p) == vol);
}
