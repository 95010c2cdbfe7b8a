#pragma once

#include <optional>
#include <string>
#include <vector>

namespace lfinr::cli {

struct EncodeArgs {
  std::string input;
  std::string output;
  std::string preset = "tiny";
  std::string config_path;  // overrides the preset when set
  std::optional<std::uint32_t> seed;
  std::optional<int> epochs;
  std::optional<int> finetune_epochs;
  std::optional<double> prune_ratio;
  std::optional<int> quant_bits;
  std::optional<double> alpha;
  std::optional<double> lr;
  int central_u = 0, central_v = 0;  // 0: keep the full grid
};

struct DecodeArgs {
  std::string input;
  std::string output;
  std::string reference;  // optional: print metrics against this field
};

struct DecodeViewArgs {
  std::string input;
  std::string output;
  double u = 0.0, v = 0.0;
  bool experimental_fractional = false;
};

struct MetricsArgs {
  std::string reconstructed;
  std::string reference;
  std::string bitstream;  // optional: adds bpp
  std::string csv;        // optional: write per-view rows
};

struct RdSweepArgs {
  std::string input;
  std::string output;
  std::vector<std::string> presets = {"tiny", "small", "medium"};
  std::optional<std::uint32_t> seed;
  std::optional<int> epochs;
  std::optional<int> finetune_epochs;
  int central_u = 0, central_v = 0;
};

struct ExportPvsArgs {
  std::string input;
  std::string output;
};

struct SynthArgs {
  std::string output;
  std::uint32_t seed = 0;
  int u_views = 3, v_views = 3;
  int height = 24, width = 32;
  double disparity = 0.35;
};

void cmd_encode(const EncodeArgs& args);
void cmd_decode(const DecodeArgs& args);
void cmd_decode_view(const DecodeViewArgs& args);
void cmd_metrics(const MetricsArgs& args);
void cmd_rd_sweep(const RdSweepArgs& args);
void cmd_export_pvs(const ExportPvsArgs& args);
void cmd_synth(const SynthArgs& args);

}  // namespace lfinr::cli
