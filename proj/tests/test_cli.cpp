#include <doctest.h>

#include <fstream>
#include <sstream>

#include "oscos/cli.hpp"
#include "oscos/eval.hpp"
#include "oscos/volume.hpp"
#include "tmpdir.hpp"

using namespace oscos;

namespace {

std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

int run(std::vector<std::string> args)
{
    return run_cli(args);
}

std::vector<std::string> small_synth(const std::filesystem::path& dir)
{
    return {"synth", "--dims", "64x64x12", "--objects", "20", "--out-dir", dir.string()};
}

std::size_t csv_rows(const std::filesystem::path& p)
{
    const std::string s = slurp(p);
    return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')) - 1;
}

} // namespace

TEST_CASE("argument parsers")
{
    CHECK(parse_dims("128x128x16") == Dimensions{128, 128, 16});
    CHECK_THROWS_AS(parse_dims("128x128"), ValidationError);
    CHECK_THROWS_AS(parse_dims("0x1x1"), ValidationError);
    CHECK_THROWS_AS(parse_dims("axbxc"), ValidationError);
    CHECK(parse_spacing("0.1,0.1,0.3") == VoxelSpacing{0.1, 0.1, 0.3});
    CHECK_THROWS_AS(parse_spacing("1,2"), ValidationError);
    CHECK_THROWS_AS(parse_spacing("1,0,1"), ValidationError);
}

TEST_CASE("config reader")
{
    TempDir tmp;
    {
        std::ofstream out(tmp / "a.cfg");
        out << "# comment\nobj-size = 30\n\nc2=1.01\ncommand=detect\nmin-dist=4\n";
    }
    const auto kv = read_config(tmp / "a.cfg");
    REQUIRE(kv.size() == 1);
    CHECK(kv[0] == std::pair<std::string, std::string>{"min-dist", "4"});
    {
        std::ofstream out(tmp / "b.cfg");
        out << "no equals sign\n";
    }
    CHECK_THROWS_AS(read_config(tmp / "b.cfg"), ValidationError);
    CHECK_THROWS_AS(read_config(tmp / "missing.cfg"), IoError);
}

TEST_CASE("exit codes")
{
    TempDir tmp;
    CHECK(run({}) == kExitUsage);
    CHECK(run({"frobnicate"}) == kExitUsage);
    CHECK(run({"--help"}) == kExitOk);
    CHECK(run({"detect"}) == kExitUsage); // --input is required
    CHECK(run({"detect", "--input", (tmp / "nope.tif").string(), "--out-dir", tmp.path.string()}) == kExitIo);
    CHECK(run({"detect", "--input", (tmp / "nope.tif").string(), "--c2", "0"}) == kExitValidation);
    CHECK(run({"detect", "--input", "x.tif", "--obj-size", "ten"}) == kExitUsage);
    CHECK(run({"synth", "--noise", "51", "--out-dir", tmp.path.string()}) == kExitValidation);
    CHECK(run({"synth", "--format", "png", "--out-dir", tmp.path.string()}) == kExitValidation);
    CHECK(run({"synth", "--config", (tmp / "missing.cfg").string()}) == kExitIo);
    CHECK(run({"eval", "--truth", "t.csv"}) == kExitUsage);
}

TEST_CASE("synth, detect and eval")
{
    TempDir tmp;
    REQUIRE(run(small_synth(tmp / "a")) == kExitOk);
    REQUIRE(run(small_synth(tmp / "b")) == kExitOk);
    CHECK(slurp(tmp / "a" / "phantom.tif") == slurp(tmp / "b" / "phantom.tif"));
    CHECK(slurp(tmp / "a" / "truth.csv") == slurp(tmp / "b" / "truth.csv"));
    CHECK(load_volume(tmp / "a" / "phantom.tif").dims() == Dimensions{64, 64, 12});
    CHECK(csv_rows(tmp / "a" / "truth.csv") == 20);

    const auto out = tmp / "det";
    REQUIRE(run({"detect", "--input", (tmp / "a" / "phantom.tif").string(), "--out-dir", out.string()}) == kExitOk);
    for (const char* f : {"objects.csv", "labels.u32raw", "nn.csv", "nn_summary.txt", kRunLogName})
        CHECK(std::filesystem::exists(out / f));
    const auto objects = load_objects_csv(out / "objects.csv");
    CHECK(objects.size() == 20);
    CHECK(load_label_map(out / "labels.u32raw").max_label() == 20);

    REQUIRE(run({"eval", "--truth", (tmp / "a" / "truth.csv").string(), "--detected", (out / "objects.csv").string(),
                 "--out-dir", out.string()}) == kExitOk);
    const std::string eval = slurp(out / "eval.csv");
    CHECK(eval.rfind("n_truth,n_detected,tp,fp,fn,tp_rate,fn_rate,fp_rate\n20,20,20,0,0,", 0) == 0);
    CHECK(csv_rows(out / "matches.csv") == 20);

    SUBCASE("explicit output paths")
    {
        REQUIRE(run({"detect", "--input", (tmp / "a" / "phantom.tif").string(), "--out-dir", out.string(),
                     "--out-objects", (tmp / "o.csv").string(), "--out-labels", (tmp / "l.u32raw").string()}) == kExitOk);
        CHECK(slurp(tmp / "o.csv") == slurp(out / "objects.csv"));
        CHECK(load_label_map(tmp / "l.u32raw") == load_label_map(out / "labels.u32raw"));
    }
    SUBCASE("coloc of a table with itself pairs every object")
    {
        REQUIRE(run({"coloc", "--a", (out / "objects.csv").string(), "--b", (out / "objects.csv").string(), "--out-dir",
                     out.string()}) == kExitOk);
        CHECK(csv_rows(out / "coloc.csv") == 20);
        REQUIRE(run({"coloc", "--overlap", "--a", (out / "labels.u32raw").string(), "--b",
                     (out / "labels.u32raw").string(), "--out-dir", (tmp / "ov").string()}) == kExitOk);
        CHECK(csv_rows(tmp / "ov" / "coloc.csv") == 20);
    }
    SUBCASE("raw output and series")
    {
        auto args = small_synth(tmp / "s");
        args.insert(args.end(), {"--series", "--format", "u16raw"});
        REQUIRE(run(args) == kExitOk);
        for (const char* n : {"N00", "N03", "N10", "N20", "N30", "N50"})
            CHECK(std::filesystem::exists(tmp / "s" / (std::string("phantom_") + n + ".u16raw")));
        CHECK(load_volume(tmp / "s" / "phantom_N00.u16raw") == load_volume(tmp / "a" / "phantom.tif"));
    }
}

TEST_CASE("config files and the run log")
{
    TempDir tmp;
    {
        std::ofstream out(tmp / "synth.cfg");
        out << "dims=64x64x12\nobjects=15\nseed=7\nout-dir=" << (tmp / "cfg").string() << "\n";
    }
    REQUIRE(run({"synth", "--config", (tmp / "synth.cfg").string()}) == kExitOk);
    CHECK(csv_rows(tmp / "cfg" / "truth.csv") == 15);

    // A flag on the command line overrides the file.
    REQUIRE(run({"synth", "--config", (tmp / "synth.cfg").string(), "--objects", "9", "--out-dir",
                 (tmp / "cli").string()}) == kExitOk);
    CHECK(csv_rows(tmp / "cli" / "truth.csv") == 9);

    const std::string log = slurp(tmp / "cli" / kRunLogName);
    CHECK(log.rfind(std::string("# oscos ") + kVersion, 0) == 0);
    CHECK(log.find("# seed 7, rng ") != std::string::npos);
    CHECK(log.find("command=synth\n") != std::string::npos);
    CHECK(log.find("objects=9\n") != std::string::npos);
    CHECK(log.find("seed=7\n") != std::string::npos);

    // Feeding the run log back reproduces the run.
    REQUIRE(run({"synth", "--config", (tmp / "cli" / kRunLogName).string(), "--out-dir", (tmp / "again").string()}) ==
            kExitOk);
    CHECK(slurp(tmp / "again" / "phantom.tif") == slurp(tmp / "cli" / "phantom.tif"));
    CHECK(slurp(tmp / "again" / "truth.csv") == slurp(tmp / "cli" / "truth.csv"));

    // The log grows by one record per run.
    REQUIRE(run({"synth", "--config", (tmp / "synth.cfg").string(), "--out-dir", (tmp / "cli").string()}) == kExitOk);
    const std::string grown = slurp(tmp / "cli" / kRunLogName);
    std::size_t records = 0;
    for (std::size_t pos = 0; (pos = grown.find("command=synth", pos)) != std::string::npos; ++pos)
        ++records;
    CHECK(records == 2);
}

TEST_CASE("detection flags reach the detector")
{
    TempDir tmp;
    REQUIRE(run(small_synth(tmp.path)) == kExitOk);
    const auto input = (tmp / "phantom.tif").string();
    REQUIRE(run({"detect", "--input", input, "--out-dir", (tmp / "d1").string()}) == kExitOk);
    REQUIRE(run({"detect", "--input", input, "--out-dir", (tmp / "d2").string(), "--c2", "1.0001", "--clip-low", "96",
                 "--threads", "3"}) == kExitOk);
    CHECK(slurp(tmp / "d1" / "objects.csv") == slurp(tmp / "d2" / "objects.csv"));
    REQUIRE(run({"detect", "--input", input, "--out-dir", (tmp / "d3").string(), "--c2", "3"}) == kExitOk);
    CHECK(csv_rows(tmp / "d3" / "objects.csv") == 0);
}
