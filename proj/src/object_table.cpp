#include <fstream>
#include <iomanip>
#include <sstream>

#include "oscos/csv.hpp"
#include "oscos/segmentation.hpp"

namespace oscos {

namespace {
constexpr std::string_view kObjectHeader =
    "id,category,parent_id,size,cx,cy,cz,xmin,xmax,ymin,ymax,zmin,zmax,mean_intensity,total_intensity,peak_intensity";
}

void write_objects_csv(std::ostream& out, std::span<const DetectedObject> objects)
{
    out << kObjectHeader << '\n' << std::fixed << std::setprecision(4);
    for (const auto& o : objects) {
        out << o.id << ',' << to_string(o.category) << ',';
        if (o.parent_id)
            out << *o.parent_id;
        out << ',' << o.size << ',' << o.centroid.x << ',' << o.centroid.y << ',' << o.centroid.z << ',' << o.bbox.xmin
            << ',' << o.bbox.xmax << ',' << o.bbox.ymin << ',' << o.bbox.ymax << ',' << o.bbox.zmin << ',' << o.bbox.zmax
            << ',' << o.mean_intensity << ',' << o.total_intensity << ',' << o.peak_intensity << '\n';
    }
}

void save_objects_csv(const std::filesystem::path& path, std::span<const DetectedObject> objects)
{
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot write " + path.string());
    write_objects_csv(out, objects);
    if (!out)
        throw IoError("failed writing " + path.string());
}

std::vector<DetectedObject> read_objects_csv(std::istream& in)
{
    const CsvTable table = read_csv(in, "object table");
    std::vector<DetectedObject> out;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const CsvRow row{table, r};
        DetectedObject o;
        o.id = static_cast<std::uint32_t>(row.get_uint("id"));
        o.category = row.has("category") && !row.text("category").empty() ? parse_category(row.text("category"))
                                                                           : Category::Normal;
        if (row.has("parent_id") && !row.text("parent_id").empty())
            o.parent_id = static_cast<std::uint32_t>(row.get_uint("parent_id"));
        o.size = row.has("size") ? row.get_uint("size") : 1;
        o.centroid = {row.get_double("cx"), row.get_double("cy"), row.get_double("cz")};
        if (row.has("xmin")) {
            o.bbox = {row.get_int("xmin"), row.get_int("xmax"), row.get_int("ymin"),
                      row.get_int("ymax"), row.get_int("zmin"), row.get_int("zmax")};
        }
        if (row.has("mean_intensity"))
            o.mean_intensity = row.get_double("mean_intensity");
        if (row.has("total_intensity"))
            o.total_intensity = row.get_double("total_intensity");
        if (row.has("peak_intensity"))
            o.peak_intensity = static_cast<std::uint16_t>(row.get_uint("peak_intensity"));
        out.push_back(o);
    }
    return out;
}

std::vector<DetectedObject> load_objects_csv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot read " + path.string());
    return read_objects_csv(in);
}

} // namespace oscos
