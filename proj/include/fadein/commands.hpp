#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fadein/decay.hpp"
#include "fadein/error.hpp"
#include "fadein/filterbank.hpp"
#include "fadein/io/csv.hpp"
#include "fadein/io/params.hpp"
#include "fadein/io/wav.hpp"
#include "fadein/kernels.hpp"
#include "fadein/metrics.hpp"
#include "fadein/rng.hpp"
#include "fadein/signal.hpp"
#include "fadein/simulation.hpp"
#include "fadein/slope_fit.hpp"
#include "fadein/synthesis.hpp"

namespace fadein {

namespace fs = std::filesystem;

// ---------------------------------------------------------------- simulate

struct SimPosition {
  std::string id;
  std::vector<double> decay_rates;
  int room = 0;  // preset room number, 0 for explicit positions
};

struct SimConfig {
  int sample_rate = 48000;
  std::size_t length = 48000;
  std::uint64_t seed = 0;
  double noise_std = 0.0;  // additive noise relative to a unit peak
  std::vector<SimPosition> positions;
};

namespace detail {

inline std::string position_name(std::size_t i) {
  std::string s = std::to_string(i);
  return "pos" + std::string(s.size() < 3 ? 3 - s.size() : 0, '0') + s;
}

inline std::uint64_t json_count(const io::Json& j, const std::string& key, const std::string& path,
                                std::uint64_t fallback, bool required = false) {
  if (!j.contains(key)) {
    if (required) throw Error(ErrorCode::kValidation, path + "." + key + ": missing");
    return fallback;
  }
  if (!j.at(key).is_number_integer() || j.at(key).get<std::int64_t>() < 0) {
    throw Error(ErrorCode::kValidation, path + "." + key + ": expected a nonnegative integer");
  }
  return j.at(key).get<std::uint64_t>();
}

}  // namespace detail

/// Parses a simulation config. Either {"preset": "three-room",
/// "num_positions": N} or {"positions": [{"id", "decay_rates"}]}; optional
/// sample_rate, length, seed, noise_std.
inline SimConfig parse_sim_config(const io::Json& j) {
  if (!j.is_object()) throw Error(ErrorCode::kValidation, "$: expected an object");
  SimConfig c;
  c.sample_rate = static_cast<int>(detail::json_count(j, "sample_rate", "$", 48000));
  c.length = detail::json_count(j, "length", "$", c.sample_rate);
  c.seed = detail::json_count(j, "seed", "$", 0);
  if (c.sample_rate <= 0) throw Error(ErrorCode::kValidation, "$.sample_rate: must be positive");
  if (c.length == 0) throw Error(ErrorCode::kValidation, "$.length: must be positive");
  if (j.contains("noise_std")) {
    const auto& n = j.at("noise_std");
    if (!n.is_number() || n.get<double>() < 0.0) {
      throw Error(ErrorCode::kValidation, "$.noise_std: expected a nonnegative number");
    }
    c.noise_std = n.get<double>();
  }

  const bool has_preset = j.contains("preset");
  const bool has_positions = j.contains("positions");
  if (has_preset == has_positions) {
    throw Error(ErrorCode::kValidation, "$: exactly one of 'preset' or 'positions' is required");
  }
  if (has_preset) {
    if (!j.at("preset").is_string() || j.at("preset").get<std::string>() != "three-room") {
      throw Error(ErrorCode::kValidation, "$.preset: only \"three-room\" is available");
    }
    const auto n = detail::json_count(j, "num_positions", "$", 0, true);
    for (std::size_t i = 0; i < n; ++i) {
      const int room = static_cast<int>(i % 3) + 1;
      c.positions.push_back({detail::position_name(i), ThreeRoomPreset::path_to(room), room});
    }
    return c;
  }

  const auto& ps = j.at("positions");
  if (!ps.is_array()) throw Error(ErrorCode::kValidation, "$.positions: expected an array");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const std::string path = "$.positions[" + std::to_string(i) + "]";
    const auto& p = ps[i];
    if (!p.is_object()) throw Error(ErrorCode::kValidation, path + ": expected an object");
    SimPosition pos;
    pos.id = detail::position_name(i);
    if (p.contains("id")) {
      if (!p.at("id").is_string() || p.at("id").get<std::string>().empty()) {
        throw Error(ErrorCode::kValidation, path + ".id: expected a nonempty string");
      }
      pos.id = p.at("id").get<std::string>();
      if (pos.id.find_first_of(",/\\\n") != std::string::npos) {
        throw Error(ErrorCode::kValidation, path + ".id: must not contain ',', '/', '\\' or newlines");
      }
    }
    if (!seen.insert(pos.id).second) {
      throw Error(ErrorCode::kValidation, path + ".id: duplicate '" + pos.id + "'");
    }
    if (!p.contains("decay_rates") || !p.at("decay_rates").is_array() ||
        p.at("decay_rates").empty()) {
      throw Error(ErrorCode::kValidation, path + ".decay_rates: expected a nonempty array");
    }
    const auto& rates = p.at("decay_rates");
    for (std::size_t r = 0; r < rates.size(); ++r) {
      if (!rates[r].is_number() || !(rates[r].get<double>() > 0.0)) {
        throw Error(ErrorCode::kValidation,
                    path + ".decay_rates[" + std::to_string(r) + "]: must be a positive number");
      }
      pos.decay_rates.push_back(rates[r].get<double>());
    }
    c.positions.push_back(std::move(pos));
  }
  return c;
}

/// Simulated RIR of position `index`: chain response scaled to unit peak,
/// plus optional white noise.
inline Rir simulate_position(const SimConfig& c, std::size_t index) {
  const SimPosition& p = c.positions.at(index);
  const std::uint64_t seed = derive_seed(c.seed, index);
  Rir rir = chain_response(RoomChain{p.decay_rates, c.length, c.sample_rate, seed});
  double peak = 0.0;
  for (double v : rir.samples) peak = std::max(peak, std::abs(v));
  if (peak > 0.0) {
    for (double& v : rir.samples) v /= peak;
  }
  if (c.noise_std > 0.0) {
    GaussianSource noise(derive_seed(seed, 0x6e6f697365ULL));
    for (double& v : rir.samples) v += c.noise_std * noise();
  }
  rir.position_id = p.id;
  return rir;
}

/// Writes one float WAV per position and manifest.json into `out_dir`.
inline void cmd_simulate(const SimConfig& c, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  io::Json manifest;
  manifest["sample_rate"] = c.sample_rate;
  manifest["length"] = c.length;
  manifest["seed"] = c.seed;
  manifest["noise_std"] = c.noise_std;
  manifest["tool_version"] = FADEIN_VERSION;
  io::Json positions = io::Json::array();
  for (std::size_t i = 0; i < c.positions.size(); ++i) {
    const Rir rir = simulate_position(c, i);
    const std::string file = c.positions[i].id + ".wav";
    io::write_wav(out_dir / file, rir);
    io::Json p;
    p["id"] = c.positions[i].id;
    p["file"] = file;
    p["decay_rates"] = c.positions[i].decay_rates;
    std::vector<double> times;
    for (double d : c.positions[i].decay_rates) times.push_back(kernel_time_from_decay_rate(d));
    p["kernel_decay_times_s"] = times;
    if (c.positions[i].room > 0) p["room"] = c.positions[i].room;
    p["seed"] = derive_seed(c.seed, i);
    positions.push_back(std::move(p));
  }
  manifest["positions"] = std::move(positions);
  const std::string text = manifest.dump(2) + "\n";
  io::write_bytes(out_dir / "manifest.json", std::vector<std::uint8_t>(text.begin(), text.end()));
}

// ---------------------------------------------------------------- dataset

/// Every *.wav file in `dir`, sorted by file name. Mixed sample rates or
/// lengths are rejected with the offending files listed.
inline std::vector<Rir> load_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::kIo, "not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".wav") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<Rir> rirs;
  for (const auto& f : files) rirs.push_back(io::read_wav(f));
  if (rirs.empty()) return rirs;

  std::map<int, std::size_t> rates;
  for (const auto& r : rirs) ++rates[r.sample_rate];
  if (rates.size() > 1) {
    const int common = std::max_element(rates.begin(), rates.end(), [](auto& a, auto& b) {
                         return a.second < b.second;
                       })->first;
    std::string offenders;
    for (const auto& r : rirs) {
      if (r.sample_rate != common) {
        offenders += (offenders.empty() ? "" : ", ") + r.position_id + " (" +
                     std::to_string(r.sample_rate) + " Hz)";
      }
    }
    throw Error(ErrorCode::kIngestion, "mixed sample rates; expected " + std::to_string(common) +
                                           " Hz, offending: " + offenders);
  }
  std::string short_files;
  for (const auto& r : rirs) {
    if (r.size() != rirs.front().size()) {
      short_files += (short_files.empty() ? "" : ", ") + r.position_id;
    }
  }
  if (!short_files.empty()) {
    throw Error(ErrorCode::kIngestion, "lengths differ from " + rirs.front().position_id + ": " +
                                           short_files);
  }
  for (const auto& r : rirs) r.validate();
  return rirs;
}

/// Number of envelope points whose window center precedes `skip_ms`.
inline std::size_t skip_points(double skip_ms, int sample_rate, std::size_t window_len) {
  const double skip_samples = std::round(skip_ms * 1e-3 * sample_rate);
  const double points = std::ceil(skip_samples / static_cast<double>(window_len) - 0.5);
  return points > 0.0 ? static_cast<std::size_t>(points) : 0;
}

// ---------------------------------------------------------------- fit

struct FitConfig {
  std::vector<double> bands = default_band_centers();
  std::vector<std::size_t> k_per_band = {2};  // one value for all bands, or one per band
  FitMode mode = FitMode::kFadeIn;
  double skip_ms = 8.0;
  std::uint64_t seed = 0;
  std::size_t window_len = 0;  // 0: length / 200
  int max_edf_components = 3;
  unsigned threads = 1;
};

struct FitOutput {
  io::ParameterFile params;
  std::vector<BandedEnvelope> envelopes;
  std::vector<SlopeFit> fits;
  std::vector<DecayEstimate> estimates;
  std::vector<std::vector<Edf>> edfs;  // [position][band]
};

inline FitOutput run_fit(const std::vector<Rir>& rirs, const FitConfig& cfg) {
  if (rirs.empty()) throw Error(ErrorCode::kInsufficientData, "dataset has no RIRs");
  if (cfg.k_per_band.size() != 1 && cfg.k_per_band.size() != cfg.bands.size()) {
    throw Error(ErrorCode::kInvalidParameter, "--k-per-band needs one value or one per band");
  }
  const int fs_rate = rirs.front().sample_rate;
  const std::size_t length = rirs.front().size();
  validate_band_centers(cfg.bands, fs_rate);
  const std::size_t w = cfg.window_len > 0 ? cfg.window_len : default_window_len(length);
  if (w > length) throw Error(ErrorCode::kInvalidWindow, "window longer than the RIRs");
  const std::size_t n_points = length / w;

  FitOutput out;
  for (const Rir& rir : rirs) {
    const auto bands = octave_filterbank(rir, cfg.bands);
    BandedEnvelope env;
    env.band_centers = cfg.bands;
    env.window_len = w;
    env.sample_rate = fs_rate;
    env.position_id = rir.position_id;
    std::vector<Edf> edfs;
    for (std::size_t b = 0; b < bands.size(); ++b) {
      env.values.push_back(rms_envelope(bands[b].samples, w));
      Edf edf = schroeder_edf(bands[b].samples, false);
      if (edf.values.front() > 0.0) {
        edf = schroeder_edf(bands[b].samples, true);
        DecayEstimate est = fit_edf_decays(edf, fs_rate, cfg.max_edf_components);
        est.band_center = cfg.bands[b];
        est.position_id = rir.position_id;
        out.estimates.push_back(std::move(est));
      }
      edfs.push_back(std::move(edf));
    }
    out.envelopes.push_back(std::move(env));
    out.edfs.push_back(std::move(edfs));
  }

  std::vector<std::vector<double>> common(cfg.bands.size());
  for (std::size_t b = 0; b < cfg.bands.size(); ++b) {
    std::vector<DecayEstimate> band_estimates;
    for (const auto& e : out.estimates) {
      if (e.band_center == cfg.bands[b]) band_estimates.push_back(e);
    }
    const std::size_t k = cfg.k_per_band.size() == 1 ? cfg.k_per_band[0] : cfg.k_per_band[b];
    auto clusters = cluster_decay_times(band_estimates, k, cfg.seed);
    if (clusters.empty()) {
      throw Error(ErrorCode::kInsufficientData,
                  "band " + io::format_number(cfg.bands[b]) + " Hz has no decay estimates");
    }
    common[b] = std::move(clusters.front().times);
  }
  const DecayKernelSet kernels = build_kernels(common, n_points, w, fs_rate);

  FitOptions opt;
  opt.mode = cfg.mode;
  opt.skip_head = skip_points(cfg.skip_ms, fs_rate, w);
  out.fits = fit_dataset(out.envelopes, kernels, opt, cfg.threads);
  out.params = io::make_parameter_file(out.fits, kernels, cfg.bands, length, opt.skip_head,
                                       cfg.mode, cfg.seed);
  return out;
}

/// Writes params.json, residuals.csv, envelopes.csv, amplitudes.csv and
/// edc.csv into `out_dir`.
inline FitOutput cmd_fit(const fs::path& dataset_dir, const FitConfig& cfg, const fs::path& out_dir) {
  FitOutput out = run_fit(load_dataset(dataset_dir), cfg);
  fs::create_directories(out_dir);
  io::write_parameter_file(out_dir / "params.json", out.params);

  const DecayKernelSet kernels = out.params.kernels();
  const auto& pf = out.params;
  const double hop_s = static_cast<double>(pf.window_len) / pf.sample_rate;
  io::CsvWriter residuals({"position", "band_hz", "objective", "rmse", "iterations", "converged"});
  io::CsvWriter envelopes({"position", "band_hz", "point", "time_s", "measured", "model"});
  io::CsvWriter amplitudes({"position", "band_hz", "component", "decay_time_s", "amplitude"});
  io::CsvWriter edc({"position", "band_hz", "time_s", "edc_db"});
  for (std::size_t p = 0; p < out.fits.size(); ++p) {
    const std::string& id = out.fits[p].position_id;
    const BandedEnvelope model = model_envelope(out.fits[p], kernels);
    for (std::size_t b = 0; b < pf.bands.size(); ++b) {
      const double hz = pf.bands[b].center_hz;
      const BandFit& fit = out.fits[p].bands[b];
      const auto& measured = out.envelopes[p].values[b];
      residuals.field(id).field(hz).field(fit.objective_value)
          .field(envelope_rmse(model.values[b], measured, pf.skip_head))
          .field(static_cast<std::size_t>(fit.iterations)).field(fit.converged ? "1" : "0");
      residuals.end_row();
      for (std::size_t m = 0; m < measured.size(); ++m) {
        envelopes.field(id).field(hz).field(m).field((m + 0.5) * hop_s).field(measured[m])
            .field(model.values[b][m]);
        envelopes.end_row();
      }
      for (std::size_t k = 0; k < fit.amplitudes.size(); ++k) {
        amplitudes.field(id).field(hz).field(k).field(pf.bands[b].decay_times_s[k])
            .field(fit.amplitudes[k]);
        amplitudes.end_row();
      }
      amplitudes.field(id).field(hz).field("noise").field("").field(fit.noise);
      amplitudes.end_row();
      // EDC sampled at the envelope window centers.
      const Edf& e = out.edfs[p][b];
      for (std::size_t m = 0; m < measured.size(); ++m) {
        const auto t = static_cast<std::size_t>((m + 0.5) * pf.window_len);
        const double v = t < e.size() ? e.values[t] : 0.0;
        edc.field(id).field(hz).field((m + 0.5) * hop_s)
            .field(v > 0.0 ? energy_to_db(v) : -std::numeric_limits<double>::infinity());
        edc.end_row();
      }
    }
  }
  residuals.save(out_dir / "residuals.csv");
  envelopes.save(out_dir / "envelopes.csv");
  amplitudes.save(out_dir / "amplitudes.csv");
  edc.save(out_dir / "edc.csv");
  return out;
}

// ---------------------------------------------------------------- synth

/// Seed of band `band` of the position at `position_index` in a parameter file.
inline std::uint64_t synth_band_seed(std::uint64_t seed, std::size_t position_index,
                                     std::size_t band) {
  return derive_seed(derive_seed(seed, position_index), band);
}

/// Broadband RIR of one position synthesized from the parameter file.
inline Rir synthesize_position(const io::ParameterFile& pf, const std::string& id,
                               std::uint64_t seed) {
  const auto ids = pf.position_ids();
  const auto it = std::find(ids.begin(), ids.end(), id);
  if (it == ids.end()) throw Error(ErrorCode::kLookup, "unknown position id '" + id + "'");
  const auto index = static_cast<std::size_t>(it - ids.begin());
  const DecayKernelSet kernels = pf.kernels();
  const BandedEnvelope env = model_envelope(pf.position(id), kernels);
  const std::size_t length = pf.length > 0 ? pf.length : pf.envelope_len * pf.window_len;
  std::vector<Rir> bands;
  for (std::size_t b = 0; b < pf.bands.size(); ++b) {
    std::vector<double> e = env.values[b];
    // Feasible fits can dip below zero by solver round-off only.
    for (double& v : e) v = std::max(v, 0.0);
    bands.push_back(synth_band(e, pf.bands[b].center_hz, pf.window_len, pf.sample_rate,
                               synth_band_seed(seed, index, b), length));
  }
  Rir out = synth_broadband(bands);
  if (bands.empty()) {
    out.sample_rate = pf.sample_rate;
    out.samples.assign(length, 0.0);
  }
  out.position_id = id;
  return out;
}

/// Writes <id>.wav per requested position plus synth.json metadata.
inline void cmd_synth(const io::ParameterFile& pf, const std::vector<std::string>& ids,
                      std::uint64_t seed, const fs::path& out_dir) {
  for (const auto& id : ids) {
    const auto known = pf.position_ids();
    if (std::find(known.begin(), known.end(), id) == known.end()) {
      throw Error(ErrorCode::kLookup, "unknown position id '" + id + "'");
    }
  }
  fs::create_directories(out_dir);
  io::Json meta;
  meta["seed"] = seed;
  meta["mode"] = std::string(to_string(pf.mode));
  meta["tool_version"] = FADEIN_VERSION;
  io::Json files = io::Json::array();
  for (const auto& id : ids) {
    io::write_wav(out_dir / (id + ".wav"), synthesize_position(pf, id, seed));
    io::Json f;
    f["id"] = id;
    f["file"] = id + ".wav";
    files.push_back(std::move(f));
  }
  meta["positions"] = std::move(files);
  const std::string text = meta.dump(2) + "\n";
  io::write_bytes(out_dir / "synth.json", std::vector<std::uint8_t>(text.begin(), text.end()));
}

// ---------------------------------------------------------------- metrics

struct MetricsRow {
  std::string position;
  double band_hz = 0.0;
  double rmse = 0.0;
  double summed_rmse = 0.0;
  double c50_reference = 0.0;
  double c50_model = 0.0;
  double c50_error = 0.0;
};

/// Compares the parameter file's model with the dataset. `filter` selects
/// positions (nullopt: every position of the parameter file).
inline std::vector<MetricsRow> run_metrics(const io::ParameterFile& pf, const std::vector<Rir>& rirs,
                                           const std::optional<std::vector<std::string>>& filter,
                                           std::uint64_t seed) {
  const auto model_ids = pf.position_ids();
  std::map<std::string, const Rir*> by_id;
  for (const auto& r : rirs) by_id[r.position_id] = &r;
  std::vector<std::string> ids;
  if (filter) {
    ids = *filter;
  } else {
    ids = model_ids;
    std::vector<std::string> extra;
    for (const auto& [id, rir] : by_id) {
      if (std::find(model_ids.begin(), model_ids.end(), id) == model_ids.end()) extra.push_back(id);
    }
    if (!extra.empty()) {
      std::string list;
      for (const auto& e : extra) list += (list.empty() ? "" : ", ") + e;
      throw Error(ErrorCode::kAlignment, "dataset positions missing from the parameter file: " + list);
    }
  }
  std::vector<MetricsRow> rows;
  if (ids.empty()) return rows;

  const DecayKernelSet kernels = pf.kernels();
  for (const auto& id : ids) {
    if (std::find(model_ids.begin(), model_ids.end(), id) == model_ids.end()) {
      throw Error(ErrorCode::kAlignment, "position '" + id + "' is not in the parameter file");
    }
    const auto found = by_id.find(id);
    if (found == by_id.end()) {
      throw Error(ErrorCode::kAlignment, "position '" + id + "' is not in the dataset");
    }
    const Rir& ref = *found->second;
    if (ref.sample_rate != pf.sample_rate || ref.size() / pf.window_len != pf.envelope_len) {
      throw Error(ErrorCode::kAlignment, "position '" + id + "' does not match the fitted grid");
    }
    const BandedEnvelope measured = extract_envelopes(ref, pf.band_centers(), pf.window_len);
    const BandedEnvelope model = model_envelope(pf.position(id), kernels);
    const double c50_ref = c50(ref);
    const double c50_model = c50(synthesize_position(pf, id, seed));
    std::vector<double> per_band;
    double total = 0.0;
    for (std::size_t b = 0; b < pf.bands.size(); ++b) {
      per_band.push_back(envelope_rmse(model.values[b], measured.values[b], pf.skip_head));
      total += per_band.back();
    }
    for (std::size_t b = 0; b < pf.bands.size(); ++b) {
      rows.push_back({id, pf.bands[b].center_hz, per_band[b], total, c50_ref, c50_model,
                      c50_ref - c50_model});
    }
  }
  return rows;
}

/// Writes metrics_<mode>.csv into `out_dir` and returns its path.
inline fs::path cmd_metrics(const io::ParameterFile& pf, const fs::path& dataset_dir,
                            const std::optional<std::vector<std::string>>& filter,
                            std::uint64_t seed, const fs::path& out_dir) {
  const auto rows = run_metrics(pf, load_dataset(dataset_dir), filter, seed);
  io::CsvWriter csv({"position", "band_hz", "rmse", "summed_rmse", "c50_reference_db",
                     "c50_model_db", "c50_error_db"});
  for (const auto& r : rows) {
    csv.field(r.position).field(r.band_hz).field(r.rmse).field(r.summed_rmse)
        .field(r.c50_reference).field(r.c50_model).field(r.c50_error);
    csv.end_row();
  }
  fs::create_directories(out_dir);
  const fs::path path = out_dir / ("metrics_" + std::string(to_string(pf.mode)) + ".csv");
  csv.save(path);
  return path;
}

}  // namespace fadein
