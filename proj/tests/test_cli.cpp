#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <string>

#include "lfinr/image_io.hpp"

using namespace lfinr;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliRun {
  int exit_code = -1;
  std::string output;
};

fs::path work_dir() {
  static fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "lfinr_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

CliRun run(const std::string& args) {
  const fs::path log = work_dir() / "last_output.txt";
  const std::string cmd =
      std::string(LFINR_BIN) + " " + args + " >" + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  CliRun result;
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(log);
  result.output.assign(std::istreambuf_iterator<char>(in), {});
  return result;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

json manifest_without_timings(const fs::path& p) {
  json j = json::parse(slurp(p));
  j.erase("timings_sec");
  return j;
}

bool field_equal(const LightField<float>& a, const LightField<float>& b) {
  if (a.u_views != b.u_views || a.v_views != b.v_views) return false;
  for (std::size_t i = 0; i < a.views.size(); ++i)
    for (int c = 0; c < 3; ++c)
      if ((a.views[i].planes[c] != b.views[i].planes[c]).any()) return false;
  return true;
}

const std::string kQuickFlags = " --preset tiny --epochs 25 --finetune-epochs 8 --seed 0";

}  // namespace

TEST_CASE("cli end-to-end pipeline") {
  const fs::path dir = work_dir();
  const std::string scene = (dir / "scene").string();
  const std::string stream = (dir / "scene.lfin").string();

  CliRun synth = run("synth -o " + scene + " --seed 0 --views 3x3 --height 24 --width 32");
  REQUIRE(synth.exit_code == 0);
  REQUIRE(fs::exists(dir / "scene" / "view_02_02.ppm"));
  CHECK(fs::exists(dir / "scene.manifest.json"));

  CliRun enc = run("encode " + scene + " -o " + stream + kQuickFlags);
  REQUIRE(enc.exit_code == 0);
  REQUIRE(fs::exists(stream));
  CHECK(enc.output.find("bpp") != std::string::npos);
  CHECK(fs::exists(dir / "scene.lfin.manifest.json"));
  CHECK(fs::exists(dir / "scene.lfin.train.csv"));

  SUBCASE("decode writes the full grid and reports metrics") {
    CliRun dec = run("decode " + stream + " -o " + (dir / "recon").string() +
                     " --reference " + scene);
    REQUIRE(dec.exit_code == 0);
    CHECK(fs::exists(dir / "recon" / "view_01_02.ppm"));
    CHECK(dec.output.find("average: yuv_psnr") != std::string::npos);

    CliRun met = run("metrics " + (dir / "recon").string() + " --reference " + scene +
                     " --bitstream " + stream + " --csv " + (dir / "metrics.csv").string());
    REQUIRE(met.exit_code == 0);
    CHECK(met.output.find("bpp") != std::string::npos);
    const std::string csv = slurp(dir / "metrics.csv");
    CHECK(csv.rfind("u,v,psnr_y,psnr_u,psnr_v,yuv_psnr,y_ssim\n", 0) == 0);
  }

  SUBCASE("decode-view matches the full decode") {
    CliRun dec = run("decode " + stream + " -o " + (dir / "recon2").string());
    REQUIRE(dec.exit_code == 0);
    CliRun dv =
        run("decode-view " + stream + " -u 1 -v 2 -o " + (dir / "v12.ppm").string());
    REQUIRE(dv.exit_code == 0);
    CHECK(slurp(dir / "v12.ppm") == slurp(dir / "recon2" / "view_01_02.ppm"));
  }

  SUBCASE("fractional coordinates need the experimental flag") {
    CliRun refused =
        run("decode-view " + stream + " -u 0.5 -v 0.5 -o " + (dir / "half.ppm").string());
    CHECK(refused.exit_code == 3);
    CHECK(!fs::exists(dir / "half.ppm"));
    CliRun allowed = run("decode-view " + stream + " -u 0.5 -v 0.5 -o " +
                         (dir / "half.ppm").string() + " --experimental-fractional");
    CHECK(allowed.exit_code == 0);
    CHECK(allowed.output.find("experimental") != std::string::npos);
    CHECK(fs::exists(dir / "half.ppm"));
  }

  SUBCASE("out-of-grid views are rejected") {
    CliRun r = run("decode-view " + stream + " -u 3 -v 0 -o " + (dir / "x.ppm").string());
    CHECK(r.exit_code == 3);
    CHECK(!fs::exists(dir / "x.ppm"));
  }

  SUBCASE("same seed and flags reproduce stream and manifest bitwise") {
    const std::string stream2 = (dir / "scene2.lfin").string();
    CliRun enc2 = run("encode " + scene + " -o " + stream2 + kQuickFlags);
    REQUIRE(enc2.exit_code == 0);
    CHECK(slurp(stream) == slurp(stream2));
    json m1 = manifest_without_timings(dir / "scene.lfin.manifest.json");
    json m2 = manifest_without_timings(dir / "scene2.lfin.manifest.json");
    m1.erase("outputs");
    m2.erase("outputs");
    CHECK(m1 == m2);
  }

  SUBCASE("corrupt streams fail cleanly without partial outputs") {
    std::string bytes = slurp(stream);
    bytes[bytes.size() / 2] ^= 0x40;
    const fs::path bad = dir / "bad.lfin";
    std::ofstream(bad, std::ios::binary) << bytes;
    CliRun r = run("decode " + bad.string() + " -o " + (dir / "bad_out").string());
    CHECK(r.exit_code == 5);
    CHECK(!fs::exists(dir / "bad_out"));
  }
}

TEST_CASE("cli error handling") {
  const fs::path dir = work_dir();

  SUBCASE("usage errors exit with 2") {
    CHECK(run("encode").exit_code == 2);
    CHECK(run("no-such-verb").exit_code == 2);
    CHECK(run("synth -o x --views banana").exit_code == 2);
  }
  SUBCASE("missing input exits with 3 and creates nothing") {
    const std::string out = (dir / "ghost.lfin").string();
    CliRun r = run("encode " + (dir / "missing").string() + " -o " + out);
    CHECK(r.exit_code == 3);
    CHECK(!fs::exists(out));
  }
  SUBCASE("synthetic scenes are deterministic across runs") {
    CliRun a = run("synth -o " + (dir / "det_a").string() + " --seed 9 --views 2x2");
    CliRun b = run("synth -o " + (dir / "det_b").string() + " --seed 9 --views 2x2");
    REQUIRE(a.exit_code == 0);
    REQUIRE(b.exit_code == 0);
    CHECK(slurp(dir / "det_a" / "view_01_01.ppm") == slurp(dir / "det_b" / "view_01_01.ppm"));
  }
}

TEST_CASE("cli export-pvs round trip") {
  const fs::path dir = work_dir();
  const std::string scene = (dir / "pvs_scene").string();
  REQUIRE(run("synth -o " + scene + " --seed 3 --views 3x3 --height 16 --width 16")
              .exit_code == 0);
  const std::string pvs = (dir / "field.lfrw").string();
  REQUIRE(run("export-pvs " + scene + " -o " + pvs).exit_code == 0);

  const json sidecar = json::parse(slurp(dir / "field.lfrw.order.json"));
  const auto order = serpentine_order(3, 3);
  REQUIRE(sidecar["order"].size() == order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    CHECK(sidecar["order"][i][0] == order[i].u);
    CHECK(sidecar["order"][i][1] == order[i].v);
  }

  // reimport through the sidecar: must reproduce the loaded field bitwise
  LightField<float> original = load_lightfield<float>(scene);
  std::vector<Sai<float>> frames = read_raw_frames<float>(pvs);
  REQUIRE(frames.size() == order.size());
  LightField<float> rebuilt(3, 3, original.height(), original.width());
  for (std::size_t i = 0; i < order.size(); ++i)
    rebuilt.view(order[i].u, order[i].v) = frames[i];
  CHECK(field_equal(original, rebuilt));
}

TEST_CASE("cli rd-sweep") {
  const fs::path dir = work_dir();
  const std::string scene = (dir / "rd_scene").string();
  REQUIRE(run("synth -o " + scene + " --seed 0 --views 3x3 --height 24 --width 32")
              .exit_code == 0);
  const std::string csv_path = (dir / "rd.csv").string();
  CliRun r = run("rd-sweep " + scene + " -o " + csv_path +
                 " --presets tiny,small --epochs 10 --finetune-epochs 4 --seed 0");
  REQUIRE(r.exit_code == 0);
  const std::string csv = slurp(csv_path);
  CHECK(csv.rfind("preset,seed,bpp,yuv_psnr,y_ssim,psnr_drop_from_compression,"
                  "ssim_drop_from_compression,status\n",
                  0) == 0);
  // two data rows, both ok, bpp increasing with preset size
  std::vector<std::string> lines;
  std::size_t pos = 0;
  while (pos < csv.size()) {
    const std::size_t eol = csv.find('\n', pos);
    lines.push_back(csv.substr(pos, eol - pos));
    pos = eol + 1;
  }
  REQUIRE(lines.size() == 3);
  CHECK(lines[1].rfind("tiny,0,", 0) == 0);
  CHECK(lines[2].rfind("small,1,", 0) == 0);
  CHECK(lines[1].find(",ok") != std::string::npos);
  CHECK(lines[2].find(",ok") != std::string::npos);
  const double bpp_tiny = std::stod(lines[1].substr(lines[1].find(",0,") + 3));
  const double bpp_small = std::stod(lines[2].substr(lines[2].find(",1,") + 3));
  CHECK(bpp_small > bpp_tiny);
}
