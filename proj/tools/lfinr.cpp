#include <CLI11.hpp>
#include <cstdio>
#include <string>

#include "commands.hpp"
#include "lfinr/common.hpp"

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitInput = 3;
constexpr int kExitNumeric = 4;
constexpr int kExitBitstream = 5;

// parses "UxV" grid specs like "11x11"
bool parse_grid(const std::string& text, int& u, int& v) {
  return std::sscanf(text.c_str(), "%dx%d", &u, &v) == 2 && u > 0 && v > 0;
}

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    fn();
    return 0;
  } catch (const lfinr::BitstreamError& e) {
    std::fprintf(stderr, "error (bitstream): %s\n", e.what());
    return kExitBitstream;
  } catch (const lfinr::TrainError& e) {
    std::fprintf(stderr, "error (training): %s\n", e.what());
    return kExitNumeric;
  } catch (const lfinr::NumericError& e) {
    std::fprintf(stderr, "error (numeric): %s\n", e.what());
    return kExitNumeric;
  } catch (const lfinr::IoError& e) {
    std::fprintf(stderr, "error (input): %s\n", e.what());
    return kExitInput;
  } catch (const lfinr::ConfigError& e) {
    std::fprintf(stderr, "error (config): %s\n", e.what());
    return kExitInput;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNumeric;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lfinr - light field compression with an implicit neural representation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(lfinr::kVersion));

  lfinr::cli::EncodeArgs enc;
  std::string enc_central;
  auto* enc_cmd = app.add_subcommand("encode", "train and compress a light field");
  enc_cmd->add_option("input", enc.input, "light field directory")->required();
  enc_cmd->add_option("-o,--output", enc.output, "output bitstream path")->required();
  enc_cmd->add_option("--preset", enc.preset, "model size preset (tiny/small/medium/large)");
  enc_cmd->add_option("--config", enc.config_path, "full JSON config (overrides preset)");
  enc_cmd->add_option("--seed", enc.seed, "train seed");
  enc_cmd->add_option("--epochs", enc.epochs, "training epochs");
  enc_cmd->add_option("--finetune-epochs", enc.finetune_epochs, "fine-tune epochs");
  enc_cmd->add_option("--prune-ratio", enc.prune_ratio, "fraction of weights to prune");
  enc_cmd->add_option("--quant-bits", enc.quant_bits, "quantization bits");
  enc_cmd->add_option("--alpha", enc.alpha, "L1/SSIM loss balance");
  enc_cmd->add_option("--lr", enc.lr, "initial learning rate");
  enc_cmd->add_option("--central-views", enc_central, "keep only the central UxV views");

  lfinr::cli::DecodeArgs dec;
  auto* dec_cmd = app.add_subcommand("decode", "reconstruct every view from a bitstream");
  dec_cmd->add_option("input", dec.input, "bitstream path")->required();
  dec_cmd->add_option("-o,--output", dec.output, "output directory")->required();
  dec_cmd->add_option("--reference", dec.reference, "reference field for metrics");

  lfinr::cli::DecodeViewArgs dv;
  auto* dv_cmd = app.add_subcommand("decode-view", "reconstruct a single view");
  dv_cmd->add_option("input", dv.input, "bitstream path")->required();
  dv_cmd->add_option("-u", dv.u, "angular row")->required();
  dv_cmd->add_option("-v", dv.v, "angular column")->required();
  dv_cmd->add_option("-o,--output", dv.output, "output image path")->required();
  dv_cmd->add_flag("--experimental-fractional", dv.experimental_fractional,
                   "allow fractional coordinates (no quality claims)");

  lfinr::cli::MetricsArgs met;
  auto* met_cmd = app.add_subcommand("metrics", "YUV-PSNR / Y-SSIM between two fields");
  met_cmd->add_option("reconstructed", met.reconstructed, "reconstructed field directory")
      ->required();
  met_cmd->add_option("--reference", met.reference, "reference field directory")
      ->required();
  met_cmd->add_option("--bitstream", met.bitstream, "bitstream whose size sets bpp");
  met_cmd->add_option("--csv", met.csv, "write per-view rows to this CSV");

  lfinr::cli::RdSweepArgs rd;
  std::string rd_central;
  auto* rd_cmd = app.add_subcommand("rd-sweep", "rate-distortion sweep over presets");
  rd_cmd->add_option("input", rd.input, "light field directory")->required();
  rd_cmd->add_option("-o,--output", rd.output, "output CSV path")->required();
  rd_cmd->add_option("--presets", rd.presets, "preset list")->delimiter(',');
  rd_cmd->add_option("--seed", rd.seed, "base seed (per-preset seeds derive from it)");
  rd_cmd->add_option("--epochs", rd.epochs, "training epochs");
  rd_cmd->add_option("--finetune-epochs", rd.finetune_epochs, "fine-tune epochs");
  rd_cmd->add_option("--central-views", rd_central, "keep only the central UxV views");

  lfinr::cli::ExportPvsArgs pvs;
  auto* pvs_cmd =
      app.add_subcommand("export-pvs", "serpentine pseudo video sequence export");
  pvs_cmd->add_option("input", pvs.input, "light field directory")->required();
  pvs_cmd->add_option("-o,--output", pvs.output, "output .lfrw container")->required();

  lfinr::cli::SynthArgs syn;
  std::string syn_views;
  auto* syn_cmd = app.add_subcommand("synth", "deterministic synthetic light field");
  syn_cmd->add_option("-o,--output", syn.output, "output directory")->required();
  syn_cmd->add_option("--seed", syn.seed, "scene seed");
  syn_cmd->add_option("--views", syn_views, "grid as UxV (default 3x3)");
  syn_cmd->add_option("--height", syn.height, "view height in pixels");
  syn_cmd->add_option("--width", syn.width, "view width in pixels");
  syn_cmd->add_option("--disparity", syn.disparity, "parallax shift per angular step");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  if (!enc_central.empty() && !parse_grid(enc_central, enc.central_u, enc.central_v)) {
    std::fprintf(stderr, "error: --central-views expects UxV\n");
    return kExitUsage;
  }
  if (!rd_central.empty() && !parse_grid(rd_central, rd.central_u, rd.central_v)) {
    std::fprintf(stderr, "error: --central-views expects UxV\n");
    return kExitUsage;
  }
  if (!syn_views.empty() && !parse_grid(syn_views, syn.u_views, syn.v_views)) {
    std::fprintf(stderr, "error: --views expects UxV\n");
    return kExitUsage;
  }

  if (enc_cmd->parsed()) return guarded([&] { lfinr::cli::cmd_encode(enc); });
  if (dec_cmd->parsed()) return guarded([&] { lfinr::cli::cmd_decode(dec); });
  if (dv_cmd->parsed()) return guarded([&] { lfinr::cli::cmd_decode_view(dv); });
  if (met_cmd->parsed()) return guarded([&] { lfinr::cli::cmd_metrics(met); });
  if (rd_cmd->parsed()) return guarded([&] { lfinr::cli::cmd_rd_sweep(rd); });
  if (pvs_cmd->parsed()) return guarded([&] { lfinr::cli::cmd_export_pvs(pvs); });
  if (syn_cmd->parsed()) return guarded([&] { lfinr::cli::cmd_synth(syn); });
  return kExitUsage;
}
