#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "oscos/segmentation.hpp"
#include "oscos/synth.hpp"

namespace oscos {

struct MatchPair {
    std::uint32_t truth_id = 0;
    std::uint32_t detected_id = 0;
    double distance = 0.0;

    friend bool operator==(const MatchPair&, const MatchPair&) = default;
};

struct Matching {
    /// In acceptance order (ascending distance).
    std::vector<MatchPair> pairs;
    std::vector<std::uint32_t> missed_truth;     // FN
    std::vector<std::uint32_t> spurious_detected; // FP
};

/// Greedy one-to-one matching by ascending centroid-to-center distance among pairs
/// within `match_radius`; equal distances resolve by (truth_id, detected_id).
Matching match_objects(const GroundTruth& truth, std::span<const DetectedObject> detected, double match_radius);

struct EvalReport {
    std::size_t n_truth = 0;
    std::size_t n_detected = 0;
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    double tp_rate = 0.0; // tp / n_truth
    double fn_rate = 0.0; // fn / n_truth
    double fp_rate = 0.0; // fp / n_detected, 0 when nothing was detected
    double runtime_seconds = 0.0;
};

/// Builds a report from raw counts; throws ValidationError when tp exceeds either total.
EvalReport report_from_counts(std::size_t n_truth, std::size_t n_detected, std::size_t tp, double runtime_seconds = 0.0);

EvalReport score(const GroundTruth& truth, std::span<const DetectedObject> detected, double match_radius,
                 double runtime_seconds = 0.0);

/// A rate in [0,1] as a whole percentage, rounded half up.
int rounded_percent(double rate);

/// One-line human summary, e.g. "TP 99% FN 1% FP 9% (109 detected / 100 truth)".
std::string format_report(const EvalReport& report);

struct Detector {
    std::string name;
    std::function<std::vector<DetectedObject>(const VolumeImage&)> run;
};

Detector oscos_detector(const DetectionParams& params, unsigned threads = 1);
Detector baseline_detector(std::size_t min_size);

struct ComparisonRow {
    int noise_level = 0;
    std::string detector;
    EvalReport report;
};

/// Runs every detector on every phantom and scores it; rows ordered by phantom
/// then detector. Runtime covers the detector call only.
std::vector<ComparisonRow> compare_detectors(std::span<const Phantom> series, std::span<const Detector> detectors,
                                             double match_radius);

/// CSV: noise_level,detector,n_truth,n_detected,tp,fp,fn,tp_rate,fn_rate,fp_rate,runtime_s
void write_report_csv(std::ostream& out, std::span<const ComparisonRow> rows);
void save_report_csv(const std::filesystem::path& path, std::span<const ComparisonRow> rows);

} // namespace oscos
