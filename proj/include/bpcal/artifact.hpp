#pragma once

// Fit artifacts on disk: a JSON document plus a binary sidecar holding the
// per-sample g and f grids, run manifests, and plot-data bundles.

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "bpcal/assay_data.hpp"
#include "bpcal/sampler.hpp"

namespace bpcal {

using nlohmann::json;

json curve_to_json(const CurveModel& g);
CurveModel curve_from_json(const json& j);  // throws ParseError(0, ...) on bad input

json config_to_json(const SamplerConfig& c);
/// Missing keys keep their defaults; unknown model names throw ParseError.
SamplerConfig config_from_json(const json& j, SamplerConfig base = {});

json dataset_to_json(const AssayDataset& d);
AssayDataset dataset_from_json(const json& j);

/// Content hash naming a fit: dataset digest plus canonical config.
std::string fit_id(const std::string& dataset_digest, const SamplerConfig& config);

struct FitArtifact {
  AssayDataset data;
  ChainTrace trace;
};

// Sidecar layout, all little endian:
//   char[8]  "BPCALBIN"
//   uint32   version (1)
//   uint32   matrix count (2: g then f)
//   uint64   rows (samples), uint64 cols (grid points)
//   float64  rows x cols of g, row major, then the same for f
inline constexpr char kSidecarMagic[8] = {'B', 'P', 'C', 'A', 'L', 'B', 'I', 'N'};
inline constexpr std::uint32_t kSidecarVersion = 1;

std::string encode_sidecar(const std::vector<std::vector<double>>& g_rows,
                           const std::vector<std::vector<double>>& f_rows);
void decode_sidecar(const std::string& bytes, std::vector<std::vector<double>>& g_rows,
                    std::vector<std::vector<double>>& f_rows);

/// Writes `<stem>.json` and `<stem>.bin` next to each other; returns the JSON
/// path. Output depends only on the artifact, so equal fits give equal bytes.
std::filesystem::path write_fit_artifact(const FitArtifact& a, const std::filesystem::path& json_path);
/// Reads both files and checks the sidecar digest. Throws IoError / ParseError.
FitArtifact read_fit_artifact(const std::filesystem::path& json_path);

json fit_artifact_json(const FitArtifact& a, const std::string& sidecar_name, const std::string& sidecar_sha256);

struct ManifestEntry {
  std::string path;  // relative to the output directory
  std::string sha256;
};

struct RunManifest {
  std::string command;
  std::string config_digest;
  std::string dataset_digest;
  std::uint64_t seed = 0;
  std::vector<ManifestEntry> files;
  double wall_time_s = 0.0;
  json extra = json::object();
};

ManifestEntry manifest_entry(const std::filesystem::path& out_dir, const std::filesystem::path& file);
void write_manifest(const RunManifest& m, const std::filesystem::path& path);

/// Pointwise summaries plus the observed scatter, the content of
/// `bpcal plotdata` and of the service's grids endpoint.
struct PlotData {
  PosteriorSummary summary;
  std::vector<Observation> scatter;
};

PlotData make_plot_data(const FitArtifact& a);
/// grid,g_median,g_lo,g_hi,f_median,f_lo,f_hi
std::string curves_csv(const PlotData& p);
/// mic,dia,count
std::string scatter_csv(const PlotData& p);
json plot_data_json(const PlotData& p);

std::string read_file(const std::filesystem::path& path);             // throws IoError
void write_file(const std::filesystem::path& path, const std::string& bytes);  // throws IoError

}  // namespace bpcal
