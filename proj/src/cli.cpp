#include "oscos/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <csignal>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "oscos/colocalization.hpp"
#include "oscos/curation_http.hpp"
#include "oscos/eval.hpp"
#include "oscos/spatial_stats.hpp"

namespace oscos {

namespace fs = std::filesystem;

namespace {

void ensure_dir(const fs::path& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

std::size_t count_category(std::span<const DetectedObject> objs, Category c)
{
    return static_cast<std::size_t>(std::count_if(objs.begin(), objs.end(), [c](const auto& o) { return o.category == c; }));
}

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string utc_now()
{
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream out;
    out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return out.str();
}

CurationServer* g_server = nullptr;

extern "C" void stop_server(int)
{
    if (g_server)
        g_server->stop();
}

} // namespace

Dimensions parse_dims(const std::string& text)
{
    Dimensions d;
    char x1 = 0, x2 = 0;
    std::istringstream in(text);
    if (!(in >> d.nx >> x1 >> d.ny >> x2 >> d.nz) || x1 != 'x' || x2 != 'x' || in.peek() != EOF)
        throw ValidationError("dimensions must look like 128x128x16, got '" + text + "'");
    validate(d);
    return d;
}

VoxelSpacing parse_spacing(const std::string& text)
{
    VoxelSpacing s;
    char c1 = 0, c2 = 0;
    std::istringstream in(text);
    if (!(in >> s.sx >> c1 >> s.sy >> c2 >> s.sz) || c1 != ',' || c2 != ',' || in.peek() != EOF)
        throw ValidationError("spacing must look like 0.1,0.1,0.3, got '" + text + "'");
    validate(s);
    return s;
}

std::vector<std::pair<std::string, std::string>> read_config(const fs::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot read config " + path.string());
    std::vector<std::pair<std::string, std::string>> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty() || line[0] == '#')
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": expected key=value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key == "command") {
            out.clear();
            continue;
        }
        out.emplace_back(std::move(key), std::move(value));
    }
    return out;
}

int cmd_detect(const DetectConfig& c)
{
    validate(c.params);
    const VolumeImage vol = load_volume(c.input, c.spacing);
    const auto t0 = std::chrono::steady_clock::now();
    const Segmentation seg = detect_objects(vol, c.params, c.threads);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    ensure_dir(c.out_dir);
    save_objects_csv(c.out_objects.value_or(c.out_dir / "objects.csv"), seg.objects);
    save_label_map(seg.labels, c.out_labels.value_or(c.out_dir / "labels.u32raw"), vol.spacing());
    const NNReport nn = nearest_neighbor_distances(seg.objects, vol.spacing(), c.params.use_physical_distance);
    save_nn_csv(c.out_dir / "nn.csv", nn);
    {
        std::ofstream out(c.out_dir / "nn_summary.txt");
        if (!out)
            throw IoError("cannot write " + (c.out_dir / "nn_summary.txt").string());
        write_nn_summary(out, nn);
    }

    std::cout << "detected " << seg.objects.size() << " objects in " << std::fixed << std::setprecision(3) << secs
              << " s (normal " << count_category(seg.objects, Category::Normal) << ", sub "
              << count_category(seg.objects, Category::Sub) << ", undersized "
              << count_category(seg.objects, Category::Undersized) << ")\n";
    return kExitOk;
}

int cmd_synth(const SynthConfig& c)
{
    validate(c.spec);
    if (c.format != "tif" && c.format != "u16raw")
        throw ValidationError("format must be tif or u16raw");
    ensure_dir(c.out_dir);
    const std::string ext = "." + c.format;
    if (c.series) {
        const auto series = noise_series(c.spec);
        for (const auto& p : series)
            save_volume(p.volume, c.out_dir / ("phantom_" + noise_label(p.noise_level) + ext));
        save_truth_csv(c.out_dir / "truth.csv", series.front().truth);
        std::cout << "wrote " << series.size() << " phantoms with " << series.front().truth.size() << " spots to "
                  << c.out_dir.string() << "\n";
    } else {
        const Phantom p = generate_phantom(c.spec);
        save_volume(p.volume, c.out_dir / ("phantom" + ext));
        save_truth_csv(c.out_dir / "truth.csv", p.truth);
        std::cout << "wrote phantom " << noise_label(p.noise_level) << " with " << p.truth.size() << " spots to "
                  << c.out_dir.string() << "\n";
    }
    return kExitOk;
}

int cmd_eval(const EvalConfig& c)
{
    if (!(c.match_radius > 0.0))
        throw ValidationError("match radius must be positive");
    const GroundTruth truth = load_truth_csv(c.truth);
    const auto detected = load_objects_csv(c.detected);
    const Matching m = match_objects(truth, detected, c.match_radius);
    const EvalReport r = report_from_counts(truth.size(), detected.size(), m.pairs.size());

    ensure_dir(c.out_dir);
    std::ofstream out(c.out_dir / "eval.csv");
    if (!out)
        throw IoError("cannot write " + (c.out_dir / "eval.csv").string());
    out << "n_truth,n_detected,tp,fp,fn,tp_rate,fn_rate,fp_rate\n"
        << r.n_truth << ',' << r.n_detected << ',' << r.tp << ',' << r.fp << ',' << r.fn << ',' << std::fixed
        << std::setprecision(4) << r.tp_rate << ',' << r.fn_rate << ',' << r.fp_rate << '\n';
    std::ofstream pairs(c.out_dir / "matches.csv");
    if (!pairs)
        throw IoError("cannot write " + (c.out_dir / "matches.csv").string());
    pairs << "truth_id,detected_id,distance\n" << std::fixed << std::setprecision(4);
    for (const auto& p : m.pairs)
        pairs << p.truth_id << ',' << p.detected_id << ',' << p.distance << '\n';

    std::cout << format_report(r) << "\n";
    return kExitOk;
}

int cmd_compare(const CompareConfig& c)
{
    validate(c.spec);
    validate(c.params);
    if (!(c.match_radius > 0.0))
        throw ValidationError("match radius must be positive");
    const auto series = noise_series(c.spec);
    const std::vector<Detector> detectors = {oscos_detector(c.params, c.threads), baseline_detector(c.params.min_size)};
    const auto rows = compare_detectors(series, detectors, c.match_radius);
    ensure_dir(c.out_dir);
    save_report_csv(c.out_dir / "comparison.csv", rows);
    for (const auto& row : rows)
        std::cout << noise_label(row.noise_level) << ' ' << std::left << std::setw(9) << row.detector
                  << format_report(row.report) << ' ' << std::fixed << std::setprecision(3)
                  << row.report.runtime_seconds << " s\n";
    return kExitOk;
}

int cmd_coloc(const ColocConfig& c)
{
    const DistanceMetric metric = c.use_physical_distance ? DistanceMetric::physical(c.spacing) : DistanceMetric::voxel();
    std::vector<ColocPair> pairs;
    if (c.overlap) {
        if (c.min_overlap == 0)
            throw ValidationError("min overlap must be at least 1");
        pairs = colocalize_by_overlap(load_label_map(c.a), load_label_map(c.b), c.min_overlap, metric);
    } else {
        if (!(c.radius >= 0.0))
            throw ValidationError("radius must be >= 0");
        pairs = colocalize_by_centroid(load_objects_csv(c.a), load_objects_csv(c.b), c.radius, metric);
    }
    ensure_dir(c.out_dir);
    save_coloc_csv(c.out_dir / "coloc.csv", pairs);
    std::cout << pairs.size() << " colocalized pairs\n";
    return kExitOk;
}

int cmd_serve(const ServeConfig& c)
{
    validate(c.params);
    Session session(load_volume(c.input, c.spacing), c.params, c.threads);
    if (c.detect_on_start) {
        const auto r = session.rerun(c.params);
        std::cout << "detected " << r.automatic_count << " objects in " << std::fixed << std::setprecision(3)
                  << r.runtime_seconds << " s\n";
    }
    CurationServer server(session);
    const int port = server.bind(c.host, c.port);
    std::cout << "serving " << c.input.string() << " on http://" << c.host << ":" << port << std::endl;
    g_server = &server;
    std::signal(SIGINT, stop_server);
    std::signal(SIGTERM, stop_server);
    server.listen();
    g_server = nullptr;
    return kExitOk;
}

namespace {

struct Options {
    DetectConfig detect;
    SynthConfig synth;
    EvalConfig eval;
    CompareConfig compare;
    bool compare_mode = false;
    ColocConfig coloc;
    ServeConfig serve;

    std::string detect_spacing, serve_spacing, coloc_spacing;
    std::string synth_dims = "128x128x16", compare_dims = "128x128x16";
    std::string synth_spacing = "1,1,1", compare_spacing = "1,1,1";
    std::string out_objects, out_labels;
    std::string config_path;
};

void add_detection_options(CLI::App* app, DetectionParams& p)
{
    app->add_option("--c2", p.preprocess.c2, "Factor applied to each slice's Otsu threshold");
    app->add_option("--sigma-xy", p.preprocess.sigma_xy, "Lateral smoothing sigma in voxels (0 = off)");
    app->add_option("--sigma-z", p.preprocess.sigma_z, "Axial smoothing sigma in voxels (0 = off)");
    app->add_option("--clip-low", p.preprocess.clip_low_pct, "Lower clipping percentile");
    app->add_option("--clip-high", p.preprocess.clip_high_pct, "Upper clipping percentile");
    app->add_option("--obj-size", p.obj_size, "Expected object volume in voxels");
    app->add_option("--min-dist", p.min_dist, "Minimum seed separation d");
    app->add_option("--min-size", p.min_size, "Smallest kept component in voxels");
    app->add_option("--merge-dist", p.merge_dist, "Centroid distance for merging adjacent labels (default min-dist/2)");
    app->add_flag("--physical", p.use_physical_distance, "Measure distances in physical units");
}

void add_phantom_options(CLI::App* app, PhantomSpec& s, std::string& dims, std::string& spacing)
{
    app->add_option("--objects", s.n_objects, "Number of spots");
    app->add_option("--dims", dims, "Volume size NXxNYxNZ");
    app->add_option("--phantom-spacing", spacing, "Voxel spacing sx,sy,sz written to the phantom");
    app->add_option("--noise", s.noise_level, "Noise level in percent of mean amplitude");
    app->add_option("--seed", s.rng_seed, "Random seed");
    app->add_option("--background", s.background_level, "Background intensity");
    app->add_option("--amp-min", s.amplitude_min, "Smallest spot amplitude");
    app->add_option("--amp-max", s.amplitude_max, "Largest spot amplitude");
    app->add_option("--spot-sigma-xy", s.spot_sigma_xy, "Lateral spot sigma in voxels");
    app->add_option("--spot-sigma-z", s.spot_sigma_z, "Axial spot sigma in voxels");
    app->add_option("--separation", s.min_center_separation, "Minimum distance between spot centres");
}

// Moves key=value lines of --config in front of the user's own flags so the
// latter win (every option keeps its last value).
std::vector<std::string> expand_config(const std::vector<std::string>& args)
{
    std::vector<std::string> out;
    std::optional<std::string> config;
    std::size_t sub = args.size();
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (sub == args.size() && !args[i].empty() && args[i][0] != '-')
            sub = i;
        if (args[i] == "--config" && i + 1 < args.size())
            config = args[i + 1];
        else if (args[i].rfind("--config=", 0) == 0)
            config = args[i].substr(9);
    }
    if (!config || sub == args.size())
        return args;
    out.assign(args.begin(), args.begin() + static_cast<std::ptrdiff_t>(sub) + 1);
    for (const auto& [k, v] : read_config(*config))
        out.push_back("--" + k + "=" + v);
    out.insert(out.end(), args.begin() + static_cast<std::ptrdiff_t>(sub) + 1, args.end());
    return out;
}

void append_run_record(const CLI::App& sub, const fs::path& out_dir, const std::optional<std::uint64_t>& seed)
{
    ensure_dir(out_dir);
    const fs::path log = out_dir / kRunLogName;
    std::ofstream out(log, std::ios::app);
    if (!out)
        throw IoError("cannot append to " + log.string());
    out << "# oscos " << kVersion << " " << utc_now() << "\n";
    if (seed)
        out << "# seed " << *seed << ", rng " << kRngAlgorithm << "\n";
    out << "command=" << sub.get_name() << "\n";
    for (const CLI::Option* o : sub.get_options()) {
        const std::string name = o->get_single_name();
        if (name == "help" || name == "config" || name.empty())
            continue;
        std::string value = o->count() ? o->as<std::string>() : o->get_default_str();
        if (o->get_expected_min() == 0 && value.empty())
            value = "false";
        if (!value.empty())
            out << name << "=" << value << "\n";
    }
    out << "\n";
}

int exit_for(const std::exception& e, int code)
{
    std::cerr << "error: " << e.what() << "\n";
    return code;
}

} // namespace

int run_cli(const std::vector<std::string>& raw_args)
{
    Options o;
    CLI::App app{"Detection, labeling and spatial analysis of spot-like objects in 3D stacks", "oscos"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast)->always_capture_default();

    auto* detect = app.add_subcommand("detect", "Segment one volume and write object table, label map and NN stats");
    detect->add_option("--config", o.config_path, "key=value file; flags given on the command line win");
    detect->add_option("--input", o.detect.input, "Volume (.tif, .tiff or .u16raw)")->required();
    detect->add_option("--spacing", o.detect_spacing, "Override voxel spacing sx,sy,sz");
    add_detection_options(detect, o.detect.params);
    detect->add_option("--threads", o.detect.threads, "Worker threads (0 = all cores)");
    detect->add_option("--out-dir", o.detect.out_dir, "Output directory");
    detect->add_option("--out-objects", o.out_objects, "Object table path (default <out-dir>/objects.csv)");
    detect->add_option("--out-labels", o.out_labels, "Label map path (default <out-dir>/labels.u32raw)");

    auto* synth = app.add_subcommand("synth", "Generate a ground-truthed phantom or the full noise series");
    synth->add_option("--config", o.config_path, "key=value file; flags given on the command line win");
    add_phantom_options(synth, o.synth.spec, o.synth_dims, o.synth_spacing);
    synth->add_flag("--series", o.synth.series, "Write all six noise levels N00..N50");
    synth->add_option("--format", o.synth.format, "tif or u16raw");
    synth->add_option("--out-dir", o.synth.out_dir, "Output directory");

    auto* eval = app.add_subcommand("eval", "Score detections against ground truth, or compare detectors on a phantom series");
    eval->add_option("--config", o.config_path, "key=value file; flags given on the command line win");
    eval->add_option("--truth", o.eval.truth, "Truth CSV");
    eval->add_option("--detected", o.eval.detected, "Object table to score");
    eval->add_option("--match-radius", o.eval.match_radius, "Largest centroid distance counted as a hit");
    eval->add_flag("--compare", o.compare_mode, "Generate the noise series and compare oscos against the global-Otsu baseline");
    add_phantom_options(eval, o.compare.spec, o.compare_dims, o.compare_spacing);
    add_detection_options(eval, o.compare.params);
    eval->add_option("--threads", o.compare.threads, "Worker threads (0 = all cores)");
    eval->add_option("--out-dir", o.eval.out_dir, "Output directory");

    auto* coloc = app.add_subcommand("coloc", "Pair objects of two channels");
    coloc->add_option("--config", o.config_path, "key=value file; flags given on the command line win");
    coloc->add_option("--a", o.coloc.a, "Channel A object table (or label map with --overlap)")->required();
    coloc->add_option("--b", o.coloc.b, "Channel B object table (or label map with --overlap)")->required();
    coloc->add_flag("--overlap", o.coloc.overlap, "Pair labels sharing voxels instead of nearby centroids");
    coloc->add_option("--radius", o.coloc.radius, "Largest centroid distance for a pair");
    coloc->add_option("--min-overlap", o.coloc.min_overlap, "Shared voxels needed in overlap mode");
    coloc->add_flag("--physical", o.coloc.use_physical_distance, "Measure distances in physical units");
    coloc->add_option("--spacing", o.coloc_spacing, "Voxel spacing sx,sy,sz for --physical");
    coloc->add_option("--out-dir", o.coloc.out_dir, "Output directory");

    auto* serve = app.add_subcommand("serve", "Host the curation HTTP API for one volume");
    serve->add_option("--config", o.config_path, "key=value file; flags given on the command line win");
    serve->add_option("--input", o.serve.input, "Volume (.tif, .tiff or .u16raw)")->required();
    serve->add_option("--spacing", o.serve_spacing, "Override voxel spacing sx,sy,sz");
    add_detection_options(serve, o.serve.params);
    serve->add_flag("--detect", o.serve.detect_on_start, "Run detection before serving");
    serve->add_option("--host", o.serve.host, "Listen address");
    serve->add_option("--port", o.serve.port, "Listen port (0 = any free port)");
    serve->add_option("--threads", o.serve.threads, "Worker threads (0 = all cores)");

    std::vector<std::string> args;
    try {
        args = expand_config(raw_args);
    } catch (const IoError& e) {
        return exit_for(e, kExitIo);
    } catch (const ValidationError& e) {
        return exit_for(e, kExitUsage);
    }

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (detect->parsed()) {
            if (!o.detect_spacing.empty())
                o.detect.spacing = parse_spacing(o.detect_spacing);
            if (!o.out_objects.empty())
                o.detect.out_objects = o.out_objects;
            if (!o.out_labels.empty())
                o.detect.out_labels = o.out_labels;
            const int rc = cmd_detect(o.detect);
            append_run_record(*detect, o.detect.out_dir, std::nullopt);
            return rc;
        }
        if (synth->parsed()) {
            o.synth.spec.dims = parse_dims(o.synth_dims);
            o.synth.spec.spacing = parse_spacing(o.synth_spacing);
            const int rc = cmd_synth(o.synth);
            append_run_record(*synth, o.synth.out_dir, o.synth.spec.rng_seed);
            return rc;
        }
        if (eval->parsed()) {
            int rc = 0;
            if (o.compare_mode) {
                o.compare.spec.dims = parse_dims(o.compare_dims);
                o.compare.spec.spacing = parse_spacing(o.compare_spacing);
                o.compare.match_radius = o.eval.match_radius;
                o.compare.out_dir = o.eval.out_dir;
                rc = cmd_compare(o.compare);
                append_run_record(*eval, o.eval.out_dir, o.compare.spec.rng_seed);
            } else {
                if (o.eval.truth.empty() || o.eval.detected.empty()) {
                    std::cerr << "error: eval needs --truth and --detected (or --compare)\n";
                    return kExitUsage;
                }
                rc = cmd_eval(o.eval);
                append_run_record(*eval, o.eval.out_dir, std::nullopt);
            }
            return rc;
        }
        if (coloc->parsed()) {
            if (!o.coloc_spacing.empty())
                o.coloc.spacing = parse_spacing(o.coloc_spacing);
            const int rc = cmd_coloc(o.coloc);
            append_run_record(*coloc, o.coloc.out_dir, std::nullopt);
            return rc;
        }
        if (serve->parsed()) {
            if (!o.serve_spacing.empty())
                o.serve.spacing = parse_spacing(o.serve_spacing);
            return cmd_serve(o.serve);
        }
    } catch (const ValidationError& e) {
        return exit_for(e, kExitValidation);
    } catch (const IoError& e) {
        return exit_for(e, kExitIo);
    } catch (const NotFoundError& e) {
        return exit_for(e, kExitIo);
    } catch (const std::exception& e) {
        return exit_for(e, kExitIo);
    }
    return kExitUsage;
}

} // namespace oscos
