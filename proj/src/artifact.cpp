#include "bpcal/artifact.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace bpcal {

namespace fs = std::filesystem;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

// ---------------------------------------------------------------------------

json curve_to_json(const CurveModel& g) {
  if (const auto* l = std::get_if<Logistic4>(&g))
    return {{"type", "logistic4"}, {"beta", {l->beta1, l->beta2, l->beta3, l->beta4}}};
  if (const auto* s = std::get_if<ISplineCurve>(&g)) {
    const KnotSequence& k = s->knots();
    return {{"type", "ispline"},
            {"interior_knots", k.interior()},
            {"boundary", {k.lo(), k.hi()}},
            {"coeffs", s->coeffs()}};
  }
  const auto& lin = std::get<LinearCurve>(g);
  return {{"type", "linear"}, {"intercept", lin.intercept}, {"slope", lin.slope}};
}

CurveModel curve_from_json(const json& j) {
  try {
    const std::string type = j.at("type").get<std::string>();
    if (type == "logistic4") {
      const auto b = j.at("beta").get<std::vector<double>>();
      if (b.size() != 4) throw ParseError(0, "logistic4 needs four coefficients");
      return Logistic4{b[0], b[1], b[2], b[3]};
    }
    if (type == "ispline") {
      const auto boundary = j.at("boundary").get<std::vector<double>>();
      if (boundary.size() != 2) throw ParseError(0, "ispline boundary needs two values");
      KnotSequence knots(j.at("interior_knots").get<std::vector<double>>(), boundary[0], boundary[1]);
      return ISplineCurve(knots, j.at("coeffs").get<std::vector<double>>());
    }
    if (type == "linear") return LinearCurve{j.at("intercept").get<double>(), j.at("slope").get<double>()};
    throw ParseError(0, "unknown curve type '" + type + "'");
  } catch (const json::exception& e) {
    throw ParseError(0, std::string("bad curve JSON: ") + e.what());
  }
}

json config_to_json(const SamplerConfig& c) {
  return {{"model", to_string(c.model)},
          {"iterations", c.iterations},
          {"burn_in", c.burn_in},
          {"thin", c.thin},
          {"seed", c.seed},
          {"grid_points", c.grid_points},
          {"adapt_start", c.adapt_start},
          {"adapt_window", c.adapt_window},
          {"k_max", c.k_max},
          {"initial_knots", c.initial_knots},
          {"knot_spacing", c.knot_spacing},
          {"use_likelihood", c.use_likelihood}};
}

SamplerConfig config_from_json(const json& j, SamplerConfig c) {
  try {
    if (j.contains("model")) {
      const auto name = j.at("model").get<std::string>();
      const auto m = parse_model(name);
      if (!m) throw ParseError(0, "unknown model '" + name + "'");
      c.model = *m;
    }
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("iterations", c.iterations);
    get("burn_in", c.burn_in);
    get("thin", c.thin);
    get("seed", c.seed);
    get("grid_points", c.grid_points);
    get("adapt_start", c.adapt_start);
    get("adapt_window", c.adapt_window);
    get("k_max", c.k_max);
    get("initial_knots", c.initial_knots);
    get("knot_spacing", c.knot_spacing);
    get("use_likelihood", c.use_likelihood);
  } catch (const json::exception& e) {
    throw ParseError(0, std::string("bad sampler config: ") + e.what());
  }
  return c;
}

json dataset_to_json(const AssayDataset& d) {
  json rows = json::array();
  for (const auto& o : d.observations())
    rows.push_back({o.mic, o.dia, o.count, to_string(o.mic_censor), to_string(o.dia_censor)});
  return {{"name", d.name()},
          {"sigma_m", d.sigma_m()},
          {"sigma_d", d.sigma_d()},
          {"n_isolates", d.total_count()},
          {"digest", d.digest()},
          {"columns", {"mic", "dia", "count", "mic_censored", "dia_censored"}},
          {"observations", rows}};
}

AssayDataset dataset_from_json(const json& j) {
  try {
    std::vector<Observation> obs;
    for (const auto& r : j.at("observations")) {
      Observation o;
      o.mic = r.at(0).get<int>();
      o.dia = r.at(1).get<int>();
      o.count = r.at(2).get<int>();
      o.mic_censor = parse_censor(r.at(3).get<std::string>());
      o.dia_censor = parse_censor(r.at(4).get<std::string>());
      obs.push_back(o);
    }
    AssayDataset d(std::move(obs), j.at("sigma_m").get<double>(), j.at("sigma_d").get<double>(),
                   j.value("name", std::string{}));
    if (j.contains("digest") && j.at("digest").get<std::string>() != d.digest())
      throw ParseError(0, "dataset digest mismatch");
    return d;
  } catch (const json::exception& e) {
    throw ParseError(0, std::string("bad dataset JSON: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ParseError(0, e.what());
  }
}

std::string fit_id(const std::string& dataset_digest, const SamplerConfig& config) {
  return sha256_hex(dataset_digest + "\n" + config_to_json(config).dump()).substr(0, 32);
}

// ---------------------------------------------------------------------------

namespace {

template <typename T>
void put_le(std::string& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.append(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw ParseError(0, "sidecar truncated");
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, in.data() + pos, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  pos += sizeof(T);
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace

std::string encode_sidecar(const std::vector<std::vector<double>>& g_rows,
                           const std::vector<std::vector<double>>& f_rows) {
  if (g_rows.size() != f_rows.size()) throw ContractViolation("sidecar: g and f row counts differ");
  const std::uint64_t rows = g_rows.size();
  const std::uint64_t cols = rows ? g_rows.front().size() : 0;
  std::string out(kSidecarMagic, sizeof(kSidecarMagic));
  put_le<std::uint32_t>(out, kSidecarVersion);
  put_le<std::uint32_t>(out, 2);
  put_le<std::uint64_t>(out, rows);
  put_le<std::uint64_t>(out, cols);
  out.reserve(out.size() + 2 * rows * cols * sizeof(double));
  for (const auto* block : {&g_rows, &f_rows}) {
    for (const auto& row : *block) {
      if (row.size() != cols) throw ContractViolation("sidecar: ragged rows");
      for (double v : row) put_le<double>(out, v);
    }
  }
  return out;
}

void decode_sidecar(const std::string& bytes, std::vector<std::vector<double>>& g_rows,
                    std::vector<std::vector<double>>& f_rows) {
  if (bytes.size() < sizeof(kSidecarMagic) || std::memcmp(bytes.data(), kSidecarMagic, sizeof(kSidecarMagic)) != 0)
    throw ParseError(0, "sidecar magic mismatch");
  std::size_t pos = sizeof(kSidecarMagic);
  const auto version = get_le<std::uint32_t>(bytes, pos);
  if (version != kSidecarVersion) throw ParseError(0, "unsupported sidecar version " + std::to_string(version));
  const auto count = get_le<std::uint32_t>(bytes, pos);
  if (count != 2) throw ParseError(0, "sidecar must hold two matrices");
  const auto rows = get_le<std::uint64_t>(bytes, pos);
  const auto cols = get_le<std::uint64_t>(bytes, pos);
  if (bytes.size() - pos != 2 * rows * cols * sizeof(double)) throw ParseError(0, "sidecar size mismatch");
  for (auto* block : {&g_rows, &f_rows}) {
    block->assign(rows, std::vector<double>(cols));
    for (auto& row : *block)
      for (auto& v : row) v = get_le<double>(bytes, pos);
  }
}

json fit_artifact_json(const FitArtifact& a, const std::string& sidecar_name, const std::string& sidecar_sha256) {
  const ChainTrace& t = a.trace;
  json samples = json::array();
  for (const auto& s : t.samples) {
    json js = {{"iteration", s.iteration}, {"curve", curve_to_json(s.curve)}, {"alpha", s.alpha},
               {"clusters", s.clusters}};
    if (!std::isnan(s.lambda)) js["lambda"] = s.lambda;
    if (s.k >= 0) js["k"] = s.k;
    samples.push_back(std::move(js));
  }
  json acc = json::object();
  for (const auto& [name, st] : t.acceptance)
    acc[name] = {{"proposed", st.proposed}, {"accepted", st.accepted}, {"rate", st.rate()}};
  return {{"format", "bpcal-fit"},
          {"version", 1},
          {"id", fit_id(a.data.digest(), t.config)},
          {"config", config_to_json(t.config)},
          {"dataset_digest", t.dataset_digest},
          {"dataset", dataset_to_json(a.data)},
          {"grid", t.grid},
          {"samples", samples},
          {"acceptance", acc},
          {"sidecar",
           {{"file", sidecar_name},
            {"sha256", sidecar_sha256},
            {"rows", t.g_grid.size()},
            {"cols", t.grid.size()},
            {"layout", "g rows then f rows, float64 little endian, row major"}}}};
}

fs::path write_fit_artifact(const FitArtifact& a, const fs::path& json_path) {
  fs::path bin_path = json_path;
  bin_path.replace_extension(".bin");
  const std::string bin = encode_sidecar(a.trace.g_grid, a.trace.f_grid);
  write_file(bin_path, bin);
  const json j = fit_artifact_json(a, bin_path.filename().string(), sha256_hex(bin));
  write_file(json_path, j.dump(1) + "\n");
  return json_path;
}

FitArtifact read_fit_artifact(const fs::path& json_path) {
  const std::string text = read_file(json_path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(0, "fit artifact is not valid JSON: " + std::string(e.what()));
  }
  try {
    FitArtifact a;
    a.data = dataset_from_json(j.at("dataset"));
    ChainTrace& t = a.trace;
    t.config = config_from_json(j.at("config"));
    t.dataset_digest = j.at("dataset_digest").get<std::string>();
    t.grid = j.at("grid").get<std::vector<double>>();
    for (const auto& js : j.at("samples")) {
      CurveSample s;
      s.iteration = js.at("iteration").get<int>();
      s.curve = curve_from_json(js.at("curve"));
      s.alpha = js.at("alpha").get<double>();
      s.clusters = js.at("clusters").get<int>();
      if (js.contains("lambda")) s.lambda = js.at("lambda").get<double>();
      if (js.contains("k")) s.k = js.at("k").get<int>();
      t.samples.push_back(std::move(s));
    }
    for (const auto& [name, st] : j.at("acceptance").items())
      t.acceptance[name] = {st.at("proposed").get<long>(), st.at("accepted").get<long>()};

    const json& side = j.at("sidecar");
    const fs::path bin_path = json_path.parent_path() / side.at("file").get<std::string>();
    const std::string bin = read_file(bin_path);
    if (sha256_hex(bin) != side.at("sha256").get<std::string>())
      throw ParseError(0, "sidecar digest mismatch for " + bin_path.string());
    decode_sidecar(bin, t.g_grid, t.f_grid);
    if (t.g_grid.size() != t.samples.size()) throw ParseError(0, "sidecar rows disagree with sample count");
    if (!t.g_grid.empty() && t.g_grid.front().size() != t.grid.size())
      throw ParseError(0, "sidecar columns disagree with the grid");
    return a;
  } catch (const json::exception& e) {
    throw ParseError(0, "malformed fit artifact: " + std::string(e.what()));
  }
}

// ---------------------------------------------------------------------------

ManifestEntry manifest_entry(const fs::path& out_dir, const fs::path& file) {
  return {fs::relative(file, out_dir).generic_string(), sha256_hex(read_file(file))};
}

void write_manifest(const RunManifest& m, const fs::path& path) {
  json files = json::array();
  for (const auto& f : m.files) files.push_back({{"path", f.path}, {"sha256", f.sha256}});
  json j = {{"command", m.command},
            {"config_digest", m.config_digest},
            {"dataset_digest", m.dataset_digest},
            {"seed", m.seed},
            {"files", files},
            {"wall_time_s", m.wall_time_s}};
  for (const auto& [k, v] : m.extra.items()) j[k] = v;
  write_file(path, j.dump(2) + "\n");
}

PlotData make_plot_data(const FitArtifact& a) {
  PlotData p;
  p.summary = posterior_summary(a.trace, 1);
  p.scatter = a.data.observations();
  return p;
}

std::string curves_csv(const PlotData& p) {
  std::ostringstream out;
  out.precision(17);
  out << "grid,g_median,g_lo,g_hi,f_median,f_lo,f_hi\n";
  const auto& s = p.summary;
  for (std::size_t i = 0; i < s.grid.size(); ++i)
    out << s.grid[i] << ',' << s.g_median[i] << ',' << s.g_lo[i] << ',' << s.g_hi[i] << ',' << s.f_median[i] << ','
        << s.f_lo[i] << ',' << s.f_hi[i] << '\n';
  return out.str();
}

std::string scatter_csv(const PlotData& p) {
  std::ostringstream out;
  out << "mic,dia,count\n";
  // Censor flags are dropped here, so rows can repeat a cell; merge them.
  std::map<std::pair<int, int>, long> cells;
  for (const auto& o : p.scatter) cells[{o.mic, o.dia}] += o.count;
  for (const auto& [xy, n] : cells) out << xy.first << ',' << xy.second << ',' << n << '\n';
  return out.str();
}

json plot_data_json(const PlotData& p) {
  const auto& s = p.summary;
  std::map<std::pair<int, int>, long> cells;
  for (const auto& o : p.scatter) cells[{o.mic, o.dia}] += o.count;
  json scatter = json::array();
  for (const auto& [xy, n] : cells) scatter.push_back({{"mic", xy.first}, {"dia", xy.second}, {"count", n}});
  return {{"grid", s.grid},     {"g_median", s.g_median}, {"g_lo", s.g_lo}, {"g_hi", s.g_hi},
          {"f_median", s.f_median}, {"f_lo", s.f_lo},     {"f_hi", s.f_hi}, {"scatter", scatter}};
}

}  // namespace bpcal
