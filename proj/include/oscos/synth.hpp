#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include "oscos/segmentation.hpp"
#include "oscos/volume.hpp"

namespace oscos {

/// Name of the pseudo-random scheme used by the generator, recorded in run metadata.
/// Uniform draws take the top 53 bits of std::mt19937_64; normals use Box-Muller.
inline constexpr const char* kRngAlgorithm = "mt19937_64+u53+box-muller";

/// Noise levels of the standard series, named N00..N50.
inline constexpr std::array<int, 6> kNoiseLevels = {0, 3, 10, 20, 30, 50};

std::string noise_label(int level);

struct PhantomSpec {
    Dimensions dims{128, 128, 16};
    VoxelSpacing spacing;
    std::size_t n_objects = 100;
    double background_level = 10000.0;
    double amplitude_min = 30.0;
    double amplitude_max = 60.0;
    double spot_sigma_xy = 2.0;
    double spot_sigma_z = 1.0;
    double min_center_separation = 8.0;
    /// 0..50; noise sigma = level/100 * mean amplitude.
    int noise_level = 0;
    std::uint64_t rng_seed = 42;

    double mean_amplitude() const { return 0.5 * (amplitude_min + amplitude_max); }
    double noise_sigma() const { return noise_level / 100.0 * mean_amplitude(); }
};

void validate(const PhantomSpec& spec);

struct TruthSpot {
    std::uint32_t id = 0;
    Point3 center;
    double amplitude = 0.0;
    double sigma_xy = 0.0;
    double sigma_z = 0.0;

    friend bool operator==(const TruthSpot&, const TruthSpot&) = default;
};

using GroundTruth = std::vector<TruthSpot>;

struct Phantom {
    int noise_level = 0;
    VolumeImage volume;
    GroundTruth truth;
};

/// Portable uniform/normal draws on top of std::mt19937_64.
class PortableRng {
public:
    explicit PortableRng(std::uint64_t seed) : engine_(seed) {}
    explicit PortableRng(std::seed_seq& seq) : engine_(seq) {}

    /// Uniform in [0, 1).
    double uniform();
    /// Uniform integer in [lo, hi].
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
    double normal();

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Places spots and renders the noise-free volume (before rounding).
GroundTruth place_spots(const PhantomSpec& spec);
std::vector<double> render_clean(const PhantomSpec& spec, const GroundTruth& truth);

/// Ground-truthed volume with Gaussian spots on a flat background plus
/// zero-mean Gaussian noise; bit-identical for identical specs.
Phantom generate_phantom(const PhantomSpec& spec);

/// The six kNoiseLevels versions of one spot layout.
std::vector<Phantom> noise_series(const PhantomSpec& spec);

/// CSV: id,cx,cy,cz,amplitude,sigma_xy,sigma_z
void write_truth_csv(std::ostream& out, const GroundTruth& truth);
void save_truth_csv(const std::filesystem::path& path, const GroundTruth& truth);
GroundTruth read_truth_csv(std::istream& in);
GroundTruth load_truth_csv(const std::filesystem::path& path);

} // namespace oscos
