#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "oscos/segmentation.hpp"
#include "oscos/synth.hpp"

namespace oscos {

inline constexpr const char* kVersion = "0.1.0";

/// Name of the run log appended in every output directory.
inline constexpr const char* kRunLogName = "oscos_runs.log";

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitIo = 2, kExitValidation = 3 };

struct DetectConfig {
    std::filesystem::path input;
    std::optional<VoxelSpacing> spacing;
    DetectionParams params;
    unsigned threads = 1;
    std::filesystem::path out_dir = ".";
    std::optional<std::filesystem::path> out_objects;
    std::optional<std::filesystem::path> out_labels;
};

struct SynthConfig {
    PhantomSpec spec;
    bool series = false;
    /// "tif" or "u16raw".
    std::string format = "tif";
    std::filesystem::path out_dir = ".";
};

struct EvalConfig {
    std::filesystem::path truth;
    std::filesystem::path detected;
    double match_radius = 4.0;
    std::filesystem::path out_dir = ".";
};

struct CompareConfig {
    PhantomSpec spec;
    DetectionParams params;
    double match_radius = 4.0;
    unsigned threads = 1;
    std::filesystem::path out_dir = ".";
};

struct ColocConfig {
    std::filesystem::path a;
    std::filesystem::path b;
    /// Label maps switch to overlap mode.
    bool overlap = false;
    double radius = 1.0;
    std::size_t min_overlap = 1;
    bool use_physical_distance = false;
    VoxelSpacing spacing;
    std::filesystem::path out_dir = ".";
};

struct ServeConfig {
    std::filesystem::path input;
    std::optional<VoxelSpacing> spacing;
    DetectionParams params;
    bool detect_on_start = false;
    std::string host = "127.0.0.1";
    int port = 8080;
    unsigned threads = 1;
};

// Each command throws IoError / ValidationError on failure; run_cli maps them to exit codes.
int cmd_detect(const DetectConfig& config);
int cmd_synth(const SynthConfig& config);
int cmd_eval(const EvalConfig& config);
int cmd_compare(const CompareConfig& config);
int cmd_coloc(const ColocConfig& config);
int cmd_serve(const ServeConfig& config);

/// "128x128x16" -> {128,128,16}.
Dimensions parse_dims(const std::string& text);
/// "sx,sy,sz" -> spacing.
VoxelSpacing parse_spacing(const std::string& text);

/// Reads a key=value config. Blank lines and '#' comments are skipped; a
/// `command=` line starts a new record and discards keys gathered so far, so a
/// run log reproduces its last run.
std::vector<std::pair<std::string, std::string>> read_config(const std::filesystem::path& path);

/// Full command line without the program name, e.g. {"detect", "--input", "a.tif"}.
int run_cli(const std::vector<std::string>& args);

} // namespace oscos
