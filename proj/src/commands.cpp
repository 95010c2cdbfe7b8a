#include "commands.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "lfinr/image_io.hpp"
#include "lfinr/pipeline.hpp"
#include "lfinr/presets.hpp"

namespace lfinr::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Staged output path: everything is written to a sibling temp path and
// renamed into place on commit, so failed commands never leave partial
// outputs behind.
class AtomicPath {
public:
  explicit AtomicPath(fs::path target) : target_(std::move(target)) {
    tmp_ = target_;
    tmp_ += ".tmp-" + std::to_string(
                          std::chrono::steady_clock::now().time_since_epoch().count() %
                          1000000);
  }
  AtomicPath(const AtomicPath&) = delete;
  ~AtomicPath() {
    if (!committed_) {
      std::error_code ec;
      fs::remove_all(tmp_, ec);
    }
  }

  const fs::path& tmp() const { return tmp_; }

  void commit() {
    std::error_code ec;
    if (fs::is_directory(target_, ec)) fs::remove_all(target_, ec);
    fs::rename(tmp_, target_);
    committed_ = true;
  }

private:
  fs::path target_, tmp_;
  bool committed_ = false;
};

void write_text_atomic(const fs::path& path, const std::string& text) {
  AtomicPath staged(path);
  {
    std::ofstream out(staged.tmp());
    if (!out) throw IoError("cannot create " + staged.tmp().string());
    out << text;
    if (!out) throw IoError("short write to " + staged.tmp().string());
  }
  staged.commit();
}

json base_manifest(const std::string& command) {
  json j;
  j["tool"] = "lfinr";
  j["version"] = kVersion;
  j["command"] = command;
  return j;
}

void write_manifest(const fs::path& beside, const json& manifest) {
  fs::path path = beside;
  path += ".manifest.json";
  write_text_atomic(path, manifest.dump(2) + "\n");
}

LightField<float> load_input_field(const std::string& dir, int central_u, int central_v) {
  LightField<float> lf = load_lightfield<float>(dir);
  if (central_u > 0 && central_v > 0) lf = select_central_views(lf, central_u, central_v);
  return lf;
}

FullConfig resolve_config(const EncodeArgs& args, const LightField<float>& lf) {
  FullConfig cfg;
  if (!args.config_path.empty()) {
    std::ifstream in(args.config_path);
    if (!in) throw IoError("cannot open config " + args.config_path);
    json j;
    try {
      in >> j;
      cfg = j.get<FullConfig>();
    } catch (const json::exception& e) {
      throw ConfigError("config " + args.config_path + ": " + e.what());
    }
    if (cfg.model.u_views != lf.u_views || cfg.model.v_views != lf.v_views ||
        cfg.model.crop_h != lf.height() || cfg.model.crop_w != lf.width())
      throw ConfigError("config dimensions do not match the input light field");
  } else {
    cfg = preset_config(find_preset(args.preset), lf.u_views, lf.v_views, lf.height(),
                        lf.width());
  }
  if (args.seed) cfg.train.seed = *args.seed;
  if (args.epochs) cfg.train.epochs = *args.epochs;
  if (args.finetune_epochs) cfg.train.finetune_epochs = *args.finetune_epochs;
  if (args.alpha) cfg.train.alpha = *args.alpha;
  if (args.lr) cfg.train.lr = *args.lr;
  if (args.prune_ratio) cfg.compress.prune_ratio = *args.prune_ratio;
  if (args.quant_bits) cfg.compress.quant_bits = *args.quant_bits;
  cfg.model.validate();
  cfg.train.validate();
  cfg.compress.validate();
  return cfg;
}

json timings_json(const StageTimings& t, double total) {
  return json{{"train", t.train_s},         {"prune", t.prune_s},
              {"finetune", t.finetune_s},   {"quantize", t.quantize_s},
              {"serialize", t.serialize_s}, {"total", total}};
}

void print_report(const char* label, const QualityReport& q) {
  if (q.bpp > 0.0)
    std::printf("%s: yuv_psnr %.3f dB  y_ssim %.5f  bpp %.5f\n", label, q.yuv_psnr,
                q.y_ssim, q.bpp);
  else
    std::printf("%s: yuv_psnr %.3f dB  y_ssim %.5f\n", label, q.yuv_psnr, q.y_ssim);
}

}  // namespace

void cmd_encode(const EncodeArgs& args) {
  const auto t0 = std::chrono::steady_clock::now();
  LightField<float> lf = load_input_field(args.input, args.central_u, args.central_v);
  FullConfig cfg = resolve_config(args, lf);

  EncodeResult<float> result = encode_lightfield(lf, cfg);

  AtomicPath staged(args.output);
  write_file(staged.tmp().string(), result.bitstream);
  staged.commit();
  result.train_log.write_csv(args.output + ".train.csv");

  const double total =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  json manifest = base_manifest("encode");
  manifest["seed"] = cfg.train.seed;
  manifest["input"] = args.input;
  manifest["outputs"] = {args.output};
  manifest["config"] = cfg;
  manifest["metrics"] = {
      {"bpp", result.post_compress.bpp},
      {"yuv_psnr", result.post_compress.yuv_psnr},
      {"y_ssim", result.post_compress.y_ssim},
      {"pre_compress_yuv_psnr", result.pre_compress.yuv_psnr},
      {"pre_compress_y_ssim", result.pre_compress.y_ssim},
      {"psnr_drop_from_compression",
       result.pre_compress.yuv_psnr - result.post_compress.yuv_psnr},
      {"ssim_drop_from_compression",
       result.pre_compress.y_ssim - result.post_compress.y_ssim},
  };
  manifest["timings_sec"] = timings_json(result.timings, total);
  write_manifest(args.output, manifest);

  std::printf("stream: %s (%zu bytes)\n", args.output.c_str(), result.bitstream.size());
  print_report("uncompressed model", result.pre_compress);
  print_report("decoded model     ", result.post_compress);
  std::printf("compression drop  : %.3f dB / %.5f ssim\n",
              result.pre_compress.yuv_psnr - result.post_compress.yuv_psnr,
              result.pre_compress.y_ssim - result.post_compress.y_ssim);
}

void cmd_decode(const DecodeArgs& args) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<std::uint8_t> bytes = read_file(args.input);
  DecodedStream info;
  Model<float> model = deserialize<float>(bytes, &info);

  LightField<float> lf = render_field(model);
  AtomicPath staged(args.output);
  save_lightfield(staged.tmp().string(), lf);
  staged.commit();

  json manifest = base_manifest("decode");
  manifest["input"] = args.input;
  manifest["outputs"] = {args.output};
  manifest["config"] = json{{"model", info.config}};
  manifest["quant_bits"] = info.quant_bits;
  manifest["views"] = {{"u", lf.u_views}, {"v", lf.v_views}};
  manifest["timings_sec"] = {
      {"total",
       std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()}};
  write_manifest(args.output, manifest);

  std::printf("decoded %dx%d views of %dx%d to %s\n", lf.u_views, lf.v_views, lf.height(),
              lf.width(), args.output.c_str());
  if (!args.reference.empty()) {
    LightField<float> ref = load_lightfield<float>(args.reference);
    QualityReport q = evaluate_field(ref, lf, bytes.size());
    for (std::size_t i = 0; i < q.per_view.size(); ++i) {
      const int u = static_cast<int>(i) / lf.v_views;
      const int v = static_cast<int>(i) % lf.v_views;
      std::printf("view (%d,%d): yuv_psnr %.3f dB  y_ssim %.5f\n", u, v,
                  q.per_view[i].yuv_psnr, q.per_view[i].y_ssim);
    }
    print_report("average", q);
  }
}

void cmd_decode_view(const DecodeViewArgs& args) {
  const std::vector<std::uint8_t> bytes = read_file(args.input);
  DecodedStream info;
  Model<float> model = deserialize<float>(bytes, &info);

  Sai<float> img;
  if (args.experimental_fractional) {
    img = model.decode_view_fractional(args.u, args.v);
    std::printf("experimental: fractional coordinate (%g,%g) is outside the trained "
                "grid semantics\n",
                args.u, args.v);
  } else {
    const double iu = std::round(args.u), iv = std::round(args.v);
    if (iu != args.u || iv != args.v)
      throw ConfigError("fractional coordinates need --experimental-fractional");
    const int u = static_cast<int>(iu), v = static_cast<int>(iv);
    if (u < 0 || u >= info.config.u_views || v < 0 || v >= info.config.v_views)
      throw ConfigError("view (" + std::to_string(u) + "," + std::to_string(v) +
                        ") outside the " + std::to_string(info.config.u_views) + "x" +
                        std::to_string(info.config.v_views) + " grid");
    img = model.decode_view({u, v});
  }

  AtomicPath staged(args.output);
  write_ppm(staged.tmp().string(), img);
  staged.commit();

  json manifest = base_manifest("decode-view");
  manifest["input"] = args.input;
  manifest["outputs"] = {args.output};
  manifest["coordinate"] = {{"u", args.u}, {"v", args.v}};
  manifest["experimental_fractional"] = args.experimental_fractional;
  write_manifest(args.output, manifest);
  std::printf("wrote %s\n", args.output.c_str());
}

void cmd_metrics(const MetricsArgs& args) {
  LightField<float> rec = load_lightfield<float>(args.reconstructed);
  LightField<float> ref = load_lightfield<float>(args.reference);
  std::size_t stream_bytes = 0;
  if (!args.bitstream.empty()) stream_bytes = read_file(args.bitstream).size();
  QualityReport q = evaluate_field(ref, rec, stream_bytes);

  for (std::size_t i = 0; i < q.per_view.size(); ++i) {
    const int u = static_cast<int>(i) / rec.v_views;
    const int v = static_cast<int>(i) % rec.v_views;
    std::printf("view (%d,%d): psnr_y %.3f psnr_u %.3f psnr_v %.3f  yuv_psnr %.3f  "
                "y_ssim %.5f\n",
                u, v, q.per_view[i].psnr_y, q.per_view[i].psnr_u, q.per_view[i].psnr_v,
                q.per_view[i].yuv_psnr, q.per_view[i].y_ssim);
  }
  print_report("average", q);

  if (!args.csv.empty()) {
    std::string text = "u,v,psnr_y,psnr_u,psnr_v,yuv_psnr,y_ssim\n";
    char buf[160];
    for (std::size_t i = 0; i < q.per_view.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%d,%d,%.6f,%.6f,%.6f,%.6f,%.6f\n",
                    static_cast<int>(i) / rec.v_views, static_cast<int>(i) % rec.v_views,
                    q.per_view[i].psnr_y, q.per_view[i].psnr_u, q.per_view[i].psnr_v,
                    q.per_view[i].yuv_psnr, q.per_view[i].y_ssim);
      text += buf;
    }
    write_text_atomic(args.csv, text);
  }
}

void cmd_rd_sweep(const RdSweepArgs& args) {
  if (args.presets.empty()) throw ConfigError("rd-sweep: need at least one preset");
  LightField<float> lf = load_input_field(args.input, args.central_u, args.central_v);

  std::string csv =
      "preset,seed,bpp,yuv_psnr,y_ssim,psnr_drop_from_compression,"
      "ssim_drop_from_compression,status\n";
  json rows = json::array();
  for (std::size_t i = 0; i < args.presets.size(); ++i) {
    const std::string& name = args.presets[i];
    // independent, recorded seed per preset
    const std::uint32_t seed = (args.seed ? *args.seed : 0) + static_cast<std::uint32_t>(i);
    char buf[256];
    try {
      FullConfig cfg =
          preset_config(find_preset(name), lf.u_views, lf.v_views, lf.height(), lf.width());
      cfg.train.seed = seed;
      if (args.epochs) cfg.train.epochs = *args.epochs;
      if (args.finetune_epochs) cfg.train.finetune_epochs = *args.finetune_epochs;
      EncodeResult<float> r = encode_lightfield(lf, cfg);
      std::snprintf(buf, sizeof(buf), "%s,%u,%.8f,%.4f,%.6f,%.4f,%.6f,ok\n", name.c_str(),
                    seed, r.post_compress.bpp, r.post_compress.yuv_psnr,
                    r.post_compress.y_ssim,
                    r.pre_compress.yuv_psnr - r.post_compress.yuv_psnr,
                    r.pre_compress.y_ssim - r.post_compress.y_ssim);
      rows.push_back({{"preset", name},
                      {"seed", seed},
                      {"bpp", r.post_compress.bpp},
                      {"yuv_psnr", r.post_compress.yuv_psnr},
                      {"y_ssim", r.post_compress.y_ssim}});
      std::printf("%s", buf);
    } catch (const Error& e) {
      // record the failure and keep sweeping
      std::snprintf(buf, sizeof(buf), "%s,%u,,,,,,error: %s\n", name.c_str(), seed,
                    e.what());
      rows.push_back({{"preset", name}, {"seed", seed}, {"error", e.what()}});
      std::fprintf(stderr, "%s", buf);
    }
    csv += buf;
  }
  write_text_atomic(args.output, csv);

  json manifest = base_manifest("rd-sweep");
  manifest["input"] = args.input;
  manifest["outputs"] = {args.output};
  manifest["presets"] = args.presets;
  manifest["rows"] = rows;
  write_manifest(args.output, manifest);
}

void cmd_export_pvs(const ExportPvsArgs& args) {
  LightField<float> lf = load_lightfield<float>(args.input);
  const std::vector<AngularCoord> order = serpentine_order(lf.u_views, lf.v_views);

  std::vector<const Sai<float>*> frames;
  frames.reserve(order.size());
  json order_json = json::array();
  for (const AngularCoord& c : order) {
    frames.push_back(&lf.view(c.u, c.v));
    order_json.push_back({c.u, c.v});
  }

  AtomicPath staged(args.output);
  write_raw_frames(staged.tmp().string(), frames);
  staged.commit();

  json sidecar;
  sidecar["views_u"] = lf.u_views;
  sidecar["views_v"] = lf.v_views;
  sidecar["height"] = lf.height();
  sidecar["width"] = lf.width();
  sidecar["order"] = order_json;
  write_text_atomic(args.output + ".order.json", sidecar.dump(2) + "\n");

  json manifest = base_manifest("export-pvs");
  manifest["input"] = args.input;
  manifest["outputs"] = {args.output, args.output + ".order.json"};
  write_manifest(args.output, manifest);
  std::printf("wrote %zu frames to %s\n", frames.size(), args.output.c_str());
}

void cmd_synth(const SynthArgs& args) {
  SynthParams params;
  params.disparity = args.disparity;
  LightField<float> lf = synth_lightfield<float>(args.seed, args.u_views, args.v_views,
                                                 args.height, args.width, params);
  AtomicPath staged(args.output);
  save_lightfield(staged.tmp().string(), lf);
  staged.commit();

  json manifest = base_manifest("synth");
  manifest["seed"] = args.seed;
  manifest["outputs"] = {args.output};
  manifest["views"] = {{"u", args.u_views}, {"v", args.v_views}};
  manifest["size"] = {{"height", args.height}, {"width", args.width}};
  manifest["disparity"] = args.disparity;
  write_manifest(args.output, manifest);
  std::printf("wrote %dx%d views of %dx%d to %s\n", args.u_views, args.v_views,
              args.height, args.width, args.output.c_str());
}

}  // namespace lfinr::cli
