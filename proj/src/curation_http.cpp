#include "oscos/curation_http.hpp"

#include <httplib.h>
#include <json.hpp>

#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

namespace oscos {

using nlohmann::json;

namespace {

json params_json(const DetectionParams& p)
{
    return {
        {"c2", p.preprocess.c2},
        {"sigma_xy", p.preprocess.sigma_xy},
        {"sigma_z", p.preprocess.sigma_z},
        {"clip_low_pct", p.preprocess.clip_low_pct},
        {"clip_high_pct", p.preprocess.clip_high_pct},
        {"obj_size", p.obj_size},
        {"min_dist", p.min_dist},
        {"min_size", p.min_size},
        {"use_physical_distance", p.use_physical_distance},
        {"merge_dist", p.merge_dist ? json(*p.merge_dist) : json(nullptr)},
    };
}

json object_json(const DetectedObject& o)
{
    return {
        {"id", o.id},
        {"category", std::string(to_string(o.category))},
        {"manual", o.category == Category::Manual},
        {"parent_id", o.parent_id ? json(*o.parent_id) : json(nullptr)},
        {"size", o.size},
        {"centroid", {{"x", o.centroid.x}, {"y", o.centroid.y}, {"z", o.centroid.z}}},
        {"bbox",
         {{"xmin", o.bbox.xmin}, {"xmax", o.bbox.xmax}, {"ymin", o.bbox.ymin},
          {"ymax", o.bbox.ymax}, {"zmin", o.bbox.zmin}, {"zmax", o.bbox.zmax}}},
        {"mean_intensity", o.mean_intensity},
        {"total_intensity", o.total_intensity},
        {"peak_intensity", o.peak_intensity},
    };
}

json parse_body(const std::string& body)
{
    try {
        return json::parse(body);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("malformed JSON body: ") + e.what());
    }
}

template <typename T>
T field(const json& j, const char* key)
{
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ValidationError(std::string("field '") + key + "' is missing or has the wrong type");
    }
}

std::size_t count_field(const json& j, const char* key)
{
    if (!j.at(key).is_number_integer() || j.at(key).get<std::int64_t>() < 0)
        throw ValidationError(std::string("field '") + key + "' must be a non-negative integer");
    return j.at(key).get<std::size_t>();
}

std::optional<std::uint64_t> expected_version(const httplib::Request& req)
{
    if (!req.has_header("If-Match"))
        return std::nullopt;
    std::string v = req.get_header_value("If-Match");
    if (v == "*")
        return std::nullopt;
    if (v.size() >= 2 && v.front() == '"' && v.back() == '"')
        v = v.substr(1, v.size() - 2);
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size())
        throw ValidationError("If-Match must hold a state version number");
    return out;
}

double query_double(const httplib::Request& req, const char* key, double fallback)
{
    if (!req.has_param(key))
        return fallback;
    const std::string s = req.get_param_value(key);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw ValidationError(std::string("query parameter '") + key + "' must be a number");
    return v;
}

std::uint64_t path_number(const httplib::Request& req)
{
    const std::string s = req.matches[1];
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw NotFoundError("no such resource: " + s);
    return v;
}

void send_json(httplib::Response& res, const json& body, int status = 200)
{
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message)
{
    send_json(res, {{"error", message}}, status);
}

// Runs a handler and turns library errors into HTTP status codes.
template <typename F>
httplib::Server::Handler guarded(Session& session, F f)
{
    return [&session, f](const httplib::Request& req, httplib::Response& res) {
        try {
            f(req, res);
        } catch (const VersionConflict& e) {
            send_error(res, 409, e.what());
        } catch (const ValidationError& e) {
            send_error(res, 400, e.what());
        } catch (const NotFoundError& e) {
            send_error(res, 404, e.what());
        } catch (const std::exception& e) {
            send_error(res, 500, e.what());
        }
        res.set_header(kStateVersionHeader, std::to_string(session.version()));
    };
}

} // namespace

std::string params_to_json(const DetectionParams& params)
{
    return params_json(params).dump();
}

DetectionParams params_from_json(const std::string& body, const DetectionParams& base)
{
    const json j = parse_body(body);
    if (!j.is_object())
        throw ValidationError("detection parameters must be a JSON object");
    DetectionParams p = base;
    for (const auto& [key, value] : j.items()) {
        if (key == "c2")
            p.preprocess.c2 = field<double>(j, "c2");
        else if (key == "sigma_xy")
            p.preprocess.sigma_xy = field<double>(j, "sigma_xy");
        else if (key == "sigma_z")
            p.preprocess.sigma_z = field<double>(j, "sigma_z");
        else if (key == "clip_low_pct")
            p.preprocess.clip_low_pct = field<double>(j, "clip_low_pct");
        else if (key == "clip_high_pct")
            p.preprocess.clip_high_pct = field<double>(j, "clip_high_pct");
        else if (key == "obj_size")
            p.obj_size = count_field(j, "obj_size");
        else if (key == "min_dist")
            p.min_dist = field<double>(j, "min_dist");
        else if (key == "min_size")
            p.min_size = count_field(j, "min_size");
        else if (key == "use_physical_distance")
            p.use_physical_distance = field<bool>(j, "use_physical_distance");
        else if (key == "merge_dist")
            p.merge_dist = value.is_null() ? std::nullopt : std::optional<double>(field<double>(j, "merge_dist"));
        else
            throw ValidationError("unknown detection parameter '" + key + "'");
    }
    validate(p);
    return p;
}

CurationServer::CurationServer(Session& session) : session_(session), server_(std::make_unique<httplib::Server>())
{
    auto& s = *server_;
    Session& ses = session_;

    s.Get("/api/meta", guarded(ses, [&ses](const httplib::Request&, httplib::Response& res) {
        const SessionMeta m = ses.meta();
        send_json(res, {
                           {"dims", {{"nx", m.dims.nx}, {"ny", m.dims.ny}, {"nz", m.dims.nz}}},
                           {"spacing", {{"sx", m.spacing.sx}, {"sy", m.spacing.sy}, {"sz", m.spacing.sz}}},
                           {"intensity_range", {{"min", m.min_intensity}, {"max", m.max_intensity}}},
                           {"params", params_json(m.params)},
                           {"object_count", m.object_count},
                           {"state_version", m.state_version},
                       });
    }));

    s.Get(R"(/api/slice/([^/]+))", guarded(ses, [&ses](const httplib::Request& req, httplib::Response& res) {
        const auto z = path_number(req);
        const SessionMeta m = ses.meta();
        const double low = query_double(req, "low", m.min_intensity);
        const double high = query_double(req, "high", m.max_intensity > m.min_intensity ? m.max_intensity : m.min_intensity + 1.0);
        const auto png = ses.slice_png(static_cast<std::size_t>(z), low, high);
        res.set_content(std::string(png.begin(), png.end()), "image/png");
    }));

    s.Get("/api/objects", guarded(ses, [&ses](const httplib::Request& req, httplib::Response& res) {
        std::optional<std::size_t> z;
        if (req.has_param("z")) {
            const double v = query_double(req, "z", 0.0);
            if (v < 0.0 || v != std::floor(v))
                throw ValidationError("z must be a non-negative integer");
            z = static_cast<std::size_t>(v);
        }
        json arr = json::array();
        for (const auto& o : ses.list_objects(z)) {
            json j = object_json(o.object);
            j["radius"] = o.radius;
            arr.push_back(std::move(j));
        }
        send_json(res, arr);
    }));

    s.Post("/api/objects", guarded(ses, [&ses](const httplib::Request& req, httplib::Response& res) {
        const json j = parse_body(req.body);
        const auto created = ses.add_object(field<std::int64_t>(j, "x"), field<std::int64_t>(j, "y"),
                                            field<std::int64_t>(j, "z"), expected_version(req));
        send_json(res, object_json(created), 201);
    }));

    s.Delete(R"(/api/objects/([^/]+))", guarded(ses, [&ses](const httplib::Request& req, httplib::Response& res) {
        const auto id = path_number(req);
        if (id > std::numeric_limits<std::uint32_t>::max())
            throw NotFoundError("no object with id " + std::to_string(id));
        ses.delete_object(static_cast<std::uint32_t>(id), expected_version(req));
        res.status = 204;
    }));

    s.Post("/api/detect", guarded(ses, [&ses](const httplib::Request& req, httplib::Response& res) {
        const DetectionParams params = params_from_json(req.body.empty() ? "{}" : req.body, ses.meta().params);
        const RerunSummary r = ses.rerun(params, expected_version(req));
        send_json(res, {
                           {"object_count", r.object_count},
                           {"automatic_count", r.automatic_count},
                           {"manual_count", r.manual_count},
                           {"runtime_seconds", r.runtime_seconds},
                           {"state_version", r.state_version},
                       });
    }));

    s.Get("/api/stats/nn", guarded(ses, [&ses](const httplib::Request&, httplib::Response& res) {
        const NNReport r = ses.nn_report();
        json neighbors = json::array();
        for (const auto& n : r.neighbors)
            neighbors.push_back({{"id", n.id}, {"nn_id", n.nn_id}, {"distance", n.distance}});
        json summary = nullptr;
        if (r.summary)
            summary = {{"mean", r.summary->mean}, {"median", r.summary->median}, {"min", r.summary->min},
                       {"max", r.summary->max}, {"stddev", r.summary->stddev}};
        send_json(res, {
                           {"object_count", r.object_count},
                           {"mean_size", r.mean_size},
                           {"mean_intensity", r.mean_intensity},
                           {"summary", summary},
                           {"neighbors", neighbors},
                       });
    }));

    s.Get("/api/export/objects.csv", guarded(ses, [&ses](const httplib::Request&, httplib::Response& res) {
        std::ostringstream out;
        write_objects_csv(out, ses.objects());
        res.set_header("Content-Disposition", "attachment; filename=\"objects.csv\"");
        res.set_content(out.str(), "text/csv");
    }));
}

CurationServer::~CurationServer() = default;

int CurationServer::bind(const std::string& host, int port)
{
    if (port == 0) {
        const int bound = server_->bind_to_any_port(host);
        if (bound < 0)
            throw IoError("cannot bind " + host);
        return bound;
    }
    if (!server_->bind_to_port(host, port))
        throw IoError("cannot bind " + host + ":" + std::to_string(port));
    return port;
}

void CurationServer::listen()
{
    server_->listen_after_bind();
}

void CurationServer::stop()
{
    server_->stop();
}

} // namespace oscos
