#include "oscos/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <tuple>

namespace oscos {

Matching match_objects(const GroundTruth& truth, std::span<const DetectedObject> detected, double match_radius)
{
    if (!(match_radius > 0.0))
        throw ValidationError("match radius must be positive");
    struct Candidate {
        double dist;
        std::uint32_t truth_id, detected_id;
        std::size_t ti, di;
    };
    const DistanceMetric metric;
    std::vector<Candidate> candidates;
    for (std::size_t i = 0; i < truth.size(); ++i)
        for (std::size_t j = 0; j < detected.size(); ++j) {
            const double dist = metric(truth[i].center, detected[j].centroid);
            if (dist <= match_radius)
                candidates.push_back({dist, truth[i].id, detected[j].id, i, j});
        }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        return std::tie(a.dist, a.truth_id, a.detected_id) < std::tie(b.dist, b.truth_id, b.detected_id);
    });

    std::vector<std::uint8_t> used_t(truth.size(), 0), used_d(detected.size(), 0);
    Matching m;
    for (const auto& c : candidates) {
        if (used_t[c.ti] || used_d[c.di])
            continue;
        used_t[c.ti] = used_d[c.di] = 1;
        m.pairs.push_back({c.truth_id, c.detected_id, c.dist});
    }
    for (std::size_t i = 0; i < truth.size(); ++i)
        if (!used_t[i])
            m.missed_truth.push_back(truth[i].id);
    for (std::size_t j = 0; j < detected.size(); ++j)
        if (!used_d[j])
            m.spurious_detected.push_back(detected[j].id);
    return m;
}

EvalReport report_from_counts(std::size_t n_truth, std::size_t n_detected, std::size_t tp, double runtime_seconds)
{
    if (tp > n_truth || tp > n_detected)
        throw ValidationError("true positives cannot exceed truth or detection counts");
    EvalReport r;
    r.n_truth = n_truth;
    r.n_detected = n_detected;
    r.tp = tp;
    r.fn = n_truth - tp;
    r.fp = n_detected - tp;
    r.tp_rate = n_truth ? static_cast<double>(tp) / static_cast<double>(n_truth) : 0.0;
    r.fn_rate = n_truth ? static_cast<double>(r.fn) / static_cast<double>(n_truth) : 0.0;
    r.fp_rate = n_detected ? static_cast<double>(r.fp) / static_cast<double>(n_detected) : 0.0;
    r.runtime_seconds = runtime_seconds;
    return r;
}

EvalReport score(const GroundTruth& truth, std::span<const DetectedObject> detected, double match_radius, double runtime_seconds)
{
    const Matching m = match_objects(truth, detected, match_radius);
    return report_from_counts(truth.size(), detected.size(), m.pairs.size(), runtime_seconds);
}

int rounded_percent(double rate)
{
    return static_cast<int>(std::floor(rate * 100.0 + 0.5));
}

std::string format_report(const EvalReport& r)
{
    std::ostringstream s;
    s << "TP " << rounded_percent(r.tp_rate) << "% FN " << rounded_percent(r.fn_rate) << "% FP " << rounded_percent(r.fp_rate)
      << "% (" << r.n_detected << " detected / " << r.n_truth << " truth)";
    return s.str();
}

Detector oscos_detector(const DetectionParams& params, unsigned threads)
{
    return {"oscos", [params, threads](const VolumeImage& vol) { return detect_objects(vol, params, threads).objects; }};
}

Detector baseline_detector(std::size_t min_size)
{
    return {"baseline", [min_size](const VolumeImage& vol) { return detect_baseline(vol, min_size).objects; }};
}

std::vector<ComparisonRow> compare_detectors(std::span<const Phantom> series, std::span<const Detector> detectors,
                                             double match_radius)
{
    if (detectors.empty())
        throw ValidationError("compare_detectors needs at least one detector");
    std::vector<ComparisonRow> rows;
    for (const auto& phantom : series) {
        for (const auto& det : detectors) {
            const auto start = std::chrono::steady_clock::now();
            const auto found = det.run(phantom.volume);
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            rows.push_back({phantom.noise_level, det.name, score(phantom.truth, found, match_radius, secs)});
        }
    }
    return rows;
}

void write_report_csv(std::ostream& out, std::span<const ComparisonRow> rows)
{
    out << "noise_level,detector,n_truth,n_detected,tp,fp,fn,tp_rate,fn_rate,fp_rate,runtime_s\n" << std::fixed;
    for (const auto& row : rows) {
        const auto& r = row.report;
        out << noise_label(row.noise_level) << ',' << row.detector << ',' << r.n_truth << ',' << r.n_detected << ',' << r.tp
            << ',' << r.fp << ',' << r.fn << ',' << std::setprecision(4) << r.tp_rate << ',' << r.fn_rate << ',' << r.fp_rate
            << ',' << std::setprecision(3) << r.runtime_seconds << '\n';
    }
}

void save_report_csv(const std::filesystem::path& path, std::span<const ComparisonRow> rows)
{
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot write " + path.string());
    write_report_csv(out, rows);
}

} // namespace oscos
