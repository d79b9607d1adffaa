#pragma once

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fadein/error.hpp"
#include "fadein/io/wav.hpp"
#include "fadein/kernels.hpp"
#include "fadein/slope_fit.hpp"

namespace fadein::io {

using Json = nlohmann::ordered_json;

struct PositionParams {
  std::string id;
  std::vector<double> amplitudes;
  double noise = 0.0;
};

struct BandParams {
  double center_hz = 0.0;
  std::vector<double> decay_times_s;  // kernel convention
  std::vector<PositionParams> positions;
};

/// Fitted common-slope model of a dataset. `envelope_len`, `length` and
/// `skip_head` extend the base schema so synthesis and metrics need no
/// side channel.
struct ParameterFile {
  int sample_rate = 48000;
  std::size_t window_len = 0;
  std::size_t envelope_len = 0;
  std::size_t length = 0;
  std::size_t skip_head = 0;
  std::vector<BandParams> bands;
  FitMode mode = FitMode::kFadeIn;
  std::string tool_version = FADEIN_VERSION;
  std::uint64_t seed = 0;

  std::vector<std::string> position_ids() const {
    std::vector<std::string> ids;
    if (!bands.empty()) {
      for (const auto& p : bands.front().positions) ids.push_back(p.id);
    }
    return ids;
  }

  DecayKernelSet kernels() const {
    std::vector<std::vector<double>> times;
    for (const auto& b : bands) times.push_back(b.decay_times_s);
    return build_kernels(times, envelope_len, window_len, sample_rate);
  }

  std::vector<double> band_centers() const {
    std::vector<double> c;
    for (const auto& b : bands) c.push_back(b.center_hz);
    return c;
  }

  /// Fit of one position as a SlopeFit; lookup error for unknown ids.
  SlopeFit position(const std::string& id) const {
    SlopeFit fit;
    fit.position_id = id;
    fit.mode = mode;
    for (const auto& b : bands) {
      const PositionParams* found = nullptr;
      for (const auto& p : b.positions) {
        if (p.id == id) found = &p;
      }
      if (found == nullptr) throw Error(ErrorCode::kLookup, "unknown position id '" + id + "'");
      BandFit bf;
      bf.amplitudes = found->amplitudes;
      bf.noise = found->noise;
      fit.bands.push_back(std::move(bf));
    }
    return fit;
  }
};

inline ParameterFile make_parameter_file(const std::vector<SlopeFit>& fits,
                                         const DecayKernelSet& kernels,
                                         const std::vector<double>& centers, std::size_t length,
                                         std::size_t skip_head, FitMode mode, std::uint64_t seed) {
  if (centers.size() != kernels.num_bands()) {
    throw Error(ErrorCode::kShape, "band centers and kernels disagree");
  }
  ParameterFile pf;
  pf.sample_rate = kernels.sample_rate;
  pf.window_len = kernels.window_len;
  pf.envelope_len = kernels.envelope_len;
  pf.length = length;
  pf.skip_head = skip_head;
  pf.mode = mode;
  pf.seed = seed;
  for (std::size_t b = 0; b < centers.size(); ++b) {
    BandParams bp;
    bp.center_hz = centers[b];
    bp.decay_times_s = kernels.bands[b].common_times;
    for (const auto& fit : fits) {
      bp.positions.push_back({fit.position_id, fit.bands.at(b).amplitudes, fit.bands.at(b).noise});
    }
    pf.bands.push_back(std::move(bp));
  }
  return pf;
}

inline Json to_json(const ParameterFile& pf) {
  Json j;
  j["sample_rate"] = pf.sample_rate;
  j["window_len"] = pf.window_len;
  j["envelope_len"] = pf.envelope_len;
  j["length"] = pf.length;
  j["skip_head"] = pf.skip_head;
  Json bands = Json::array();
  for (const auto& b : pf.bands) {
    Json jb;
    jb["center_hz"] = b.center_hz;
    jb["decay_times_s"] = b.decay_times_s;
    Json positions = Json::array();
    for (const auto& p : b.positions) {
      Json jp;
      jp["id"] = p.id;
      jp["amplitudes"] = p.amplitudes;
      jp["noise"] = p.noise;
      positions.push_back(std::move(jp));
    }
    jb["positions"] = std::move(positions);
    bands.push_back(std::move(jb));
  }
  j["bands"] = std::move(bands);
  j["mode"] = std::string(to_string(pf.mode));
  j["tool_version"] = pf.tool_version;
  j["seed"] = pf.seed;
  return j;
}

namespace detail {

inline const Json& field(const Json& j, const std::string& key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) {
    throw Error(ErrorCode::kValidation, path + "." + key + ": missing");
  }
  return j.at(key);
}

inline double number(const Json& j, const std::string& path) {
  if (!j.is_number()) throw Error(ErrorCode::kValidation, path + ": expected a number");
  return j.get<double>();
}

inline std::uint64_t count(const Json& j, const std::string& path) {
  if (!j.is_number_integer() || (!j.is_number_unsigned() && j.get<std::int64_t>() < 0)) {
    throw Error(ErrorCode::kValidation, path + ": expected a nonnegative integer");
  }
  return j.get<std::uint64_t>();
}

inline std::vector<double> numbers(const Json& j, const std::string& path) {
  if (!j.is_array()) throw Error(ErrorCode::kValidation, path + ": expected an array");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

}  // namespace detail

/// Schema validation; errors carry the offending field path.
inline ParameterFile from_json(const Json& j) {
  using detail::field;
  ParameterFile pf;
  pf.sample_rate = static_cast<int>(detail::count(field(j, "sample_rate", "$"), "$.sample_rate"));
  pf.window_len = detail::count(field(j, "window_len", "$"), "$.window_len");
  pf.envelope_len = detail::count(field(j, "envelope_len", "$"), "$.envelope_len");
  pf.length = detail::count(field(j, "length", "$"), "$.length");
  pf.skip_head = detail::count(field(j, "skip_head", "$"), "$.skip_head");
  const Json& mode = field(j, "mode", "$");
  if (!mode.is_string()) throw Error(ErrorCode::kValidation, "$.mode: expected a string");
  try {
    pf.mode = parse_fit_mode(mode.get<std::string>());
  } catch (const Error& e) {
    throw Error(ErrorCode::kValidation, std::string("$.mode: ") + e.what());
  }
  const Json& version = field(j, "tool_version", "$");
  if (!version.is_string()) throw Error(ErrorCode::kValidation, "$.tool_version: expected a string");
  pf.tool_version = version.get<std::string>();
  pf.seed = detail::count(field(j, "seed", "$"), "$.seed");
  if (pf.sample_rate <= 0 || pf.window_len == 0) {
    throw Error(ErrorCode::kValidation, "$.sample_rate/$.window_len: must be positive");
  }

  const Json& bands = field(j, "bands", "$");
  if (!bands.is_array()) throw Error(ErrorCode::kValidation, "$.bands: expected an array");
  for (std::size_t b = 0; b < bands.size(); ++b) {
    const std::string bpath = "$.bands[" + std::to_string(b) + "]";
    BandParams bp;
    bp.center_hz = detail::number(field(bands[b], "center_hz", bpath), bpath + ".center_hz");
    bp.decay_times_s = detail::numbers(field(bands[b], "decay_times_s", bpath), bpath + ".decay_times_s");
    const Json& positions = field(bands[b], "positions", bpath);
    if (!positions.is_array()) {
      throw Error(ErrorCode::kValidation, bpath + ".positions: expected an array");
    }
    for (std::size_t p = 0; p < positions.size(); ++p) {
      const std::string ppath = bpath + ".positions[" + std::to_string(p) + "]";
      PositionParams pp;
      const Json& id = field(positions[p], "id", ppath);
      if (!id.is_string()) throw Error(ErrorCode::kValidation, ppath + ".id: expected a string");
      pp.id = id.get<std::string>();
      pp.amplitudes = detail::numbers(field(positions[p], "amplitudes", ppath), ppath + ".amplitudes");
      pp.noise = detail::number(field(positions[p], "noise", ppath), ppath + ".noise");
      if (pp.amplitudes.size() != bp.decay_times_s.size()) {
        throw Error(ErrorCode::kValidation,
                    ppath + ".amplitudes: length differs from decay_times_s");
      }
      bp.positions.push_back(std::move(pp));
    }
    if (b > 0) {
      const auto& first = pf.bands.front().positions;
      bool same = first.size() == bp.positions.size();
      for (std::size_t p = 0; same && p < first.size(); ++p) same = first[p].id == bp.positions[p].id;
      if (!same) {
        throw Error(ErrorCode::kValidation, bpath + ".positions: ids differ from $.bands[0]");
      }
    }
    pf.bands.push_back(std::move(bp));
  }
  return pf;
}

inline std::string dump_parameter_file(const ParameterFile& pf) { return to_json(pf).dump(2) + "\n"; }

inline ParameterFile parse_parameter_file(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::kValidation, std::string("$: ") + e.what());
  }
  return from_json(j);
}

inline void write_parameter_file(const std::filesystem::path& path, const ParameterFile& pf) {
  const std::string text = dump_parameter_file(pf);
  write_bytes(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

inline ParameterFile read_parameter_file(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  return parse_parameter_file(std::string(bytes.begin(), bytes.end()));
}

}  // namespace fadein::io
