#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fadein/commands.hpp"

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  if (s.empty()) return out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, sep)) out.push_back(item);
  return out;
}

template <typename T>
std::vector<T> parse_list(const std::string& s, const char* what) {
  std::vector<T> out;
  for (const auto& item : split(s, ',')) {
    std::size_t used = 0;
    try {
      if constexpr (std::is_same_v<T, double>) {
        out.push_back(std::stod(item, &used));
      } else {
        out.push_back(static_cast<T>(std::stoull(item, &used)));
      }
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) {
      throw fadein::Error(fadein::ErrorCode::kInvalidParameter,
                          std::string("bad value '") + item + "' in " + what);
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Common-slope fitting of fade-in room impulse responses"};
  app.set_version_flag("--version", std::string(FADEIN_VERSION));
  app.require_subcommand(1);

  std::string sim_config, sim_out;
  auto* simulate = app.add_subcommand("simulate", "Simulate a dataset from a JSON config");
  simulate->add_option("config", sim_config, "Simulation config (JSON)")->required()->check(CLI::ExistingFile);
  simulate->add_option("-o,--out", sim_out, "Output dataset directory")->required();

  std::string fit_dataset_dir, fit_out, bands_arg, k_arg = "2", mode_arg = "fadein";
  double skip_ms = 8.0;
  std::uint64_t fit_seed = 0;
  std::size_t window_len = 0;
  int max_edf = 3;
  unsigned threads = 1;
  auto* fit = app.add_subcommand("fit", "Fit common decay times and amplitudes to a dataset");
  fit->add_option("dataset", fit_dataset_dir, "Directory of mono WAV files")->required()->check(CLI::ExistingDirectory);
  fit->add_option("-o,--out", fit_out, "Output directory")->required();
  fit->add_option("--bands", bands_arg, "Comma-separated octave centers in Hz (default 125..8000)");
  fit->add_option("--k-per-band", k_arg, "Common decay times per band: one value or one per band")->capture_default_str();
  fit->add_option("--mode", mode_arg, "fadein or posonly")->capture_default_str();
  fit->add_option("--skip-ms", skip_ms, "Initial milliseconds excluded from the objective")->capture_default_str();
  fit->add_option("--seed", fit_seed, "Clustering seed")->capture_default_str();
  fit->add_option("--window-len", window_len, "Envelope window in samples (0: length/200)")->capture_default_str();
  fit->add_option("--max-edf-components", max_edf, "Slopes per EDF fit (1-3)")->capture_default_str();
  fit->add_option("--threads", threads, "Worker threads for fitting")->capture_default_str();

  std::string synth_params, synth_out;
  std::optional<std::string> synth_positions;
  std::uint64_t synth_seed = 0;
  auto* synth = app.add_subcommand("synth", "Synthesize RIRs from a parameter file");
  synth->add_option("params", synth_params, "Parameter file")->required()->check(CLI::ExistingFile);
  synth->add_option("-o,--out", synth_out, "Output directory")->required();
  synth->add_option("--positions", synth_positions, "Comma-separated position ids (default: all)");
  synth->add_option("--seed", synth_seed, "Noise seed")->capture_default_str();

  std::string met_params, met_dataset, met_out;
  std::optional<std::string> met_positions;
  std::uint64_t met_seed = 0;
  auto* metrics = app.add_subcommand("metrics", "Envelope RMSE and C50 of a fit against a dataset");
  metrics->add_option("params", met_params, "Parameter file")->required()->check(CLI::ExistingFile);
  metrics->add_option("dataset", met_dataset, "Directory of mono WAV files")->required()->check(CLI::ExistingDirectory);
  metrics->add_option("-o,--out", met_out, "Output directory")->required();
  metrics->add_option("--positions", met_positions, "Comma-separated position ids (default: all)");
  metrics->add_option("--seed", met_seed, "Noise seed of the synthesized RIRs")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*simulate) {
      const auto bytes = fadein::io::read_bytes(sim_config);
      fadein::io::Json j;
      try {
        j = fadein::io::Json::parse(bytes.begin(), bytes.end());
      } catch (const fadein::io::Json::parse_error& e) {
        throw fadein::Error(fadein::ErrorCode::kValidation, std::string("$: ") + e.what());
      }
      fadein::cmd_simulate(fadein::parse_sim_config(j), sim_out);
    } else if (*fit) {
      fadein::FitConfig cfg;
      if (!bands_arg.empty()) cfg.bands = parse_list<double>(bands_arg, "--bands");
      cfg.k_per_band = parse_list<std::size_t>(k_arg, "--k-per-band");
      cfg.mode = fadein::parse_fit_mode(mode_arg);
      cfg.skip_ms = skip_ms;
      cfg.seed = fit_seed;
      cfg.window_len = window_len;
      cfg.max_edf_components = max_edf;
      cfg.threads = threads;
      fadein::cmd_fit(fit_dataset_dir, cfg, fit_out);
    } else if (*synth) {
      const auto pf = fadein::io::read_parameter_file(synth_params);
      const auto ids = synth_positions ? split(*synth_positions, ',') : pf.position_ids();
      fadein::cmd_synth(pf, ids, synth_seed, synth_out);
    } else if (*metrics) {
      const auto pf = fadein::io::read_parameter_file(met_params);
      std::optional<std::vector<std::string>> filter;
      if (met_positions) filter = split(*met_positions, ',');
      std::cout << fadein::cmd_metrics(pf, met_dataset, filter, met_seed, met_out).string() << "\n";
    }
  } catch (const fadein::Error& e) {
    std::cerr << "error [" << fadein::to_string(e.code()) << "]: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
