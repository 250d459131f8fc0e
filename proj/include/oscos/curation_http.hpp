#pragma once

#include <memory>
#include <string>

#include "oscos/curation.hpp"

namespace httplib {
class Server;
}

namespace oscos {

/// Header carrying the state version on every response.
inline constexpr const char* kStateVersionHeader = "X-State-Version";

/// JSON form of DetectionParams. Keys: c2, sigma_xy, sigma_z, clip_low_pct,
/// clip_high_pct, obj_size, min_dist, min_size, use_physical_distance, merge_dist.
std::string params_to_json(const DetectionParams& params);
/// Keys absent from `body` keep their value from `base`. Unknown keys and
/// mistyped values throw ValidationError.
DetectionParams params_from_json(const std::string& body, const DetectionParams& base);

/// HTTP API over one Session:
///   GET /api/meta, GET /api/slice/{z}?low=&high=, GET|POST /api/objects,
///   DELETE /api/objects/{id}, POST /api/detect, GET /api/stats/nn,
///   GET /api/export/objects.csv
/// Mutations honour an If-Match header holding the expected state version (409 on mismatch).
class CurationServer {
public:
    explicit CurationServer(Session& session);
    ~CurationServer();
    CurationServer(const CurationServer&) = delete;
    CurationServer& operator=(const CurationServer&) = delete;

    /// Binds without serving; port 0 picks a free port. Returns the bound port.
    int bind(const std::string& host, int port);
    /// Serves until stop() is called. Requires a prior bind().
    void listen();
    void stop();

private:
    Session& session_;
    std::unique_ptr<httplib::Server> server_;
};

} // namespace oscos
