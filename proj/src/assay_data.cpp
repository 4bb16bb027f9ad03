#include "bpcal/assay_data.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <tuple>

namespace bpcal {

ParseError::ParseError(std::size_t row, const std::string& what)
    : Error("row " + std::to_string(row) + ": " + what), row_(row) {}

const char* to_string(Censor c) {
  switch (c) {
    case Censor::left:
      return "left";
    case Censor::right:
      return "right";
    case Censor::none:
      break;
  }
  return "none";
}

Censor parse_censor(const std::string& token) {
  if (token.empty() || token == "none") return Censor::none;
  if (token == "left") return Censor::left;
  if (token == "right") return Censor::right;
  throw std::invalid_argument("unknown censor token '" + token + "'");
}

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

bool parse_int(const std::string& s, int& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

// Assay value with an optional censoring prefix.
bool parse_assay_value(const std::string& s, int& value, Censor& censor) {
  std::string body = s;
  censor = Censor::none;
  if (body.rfind("<=", 0) == 0) {
    censor = Censor::left;
    body = trim(body.substr(2));
  } else if (body.rfind(">=", 0) == 0) {
    censor = Censor::right;
    body = trim(body.substr(2));
  } else if (body.rfind(">", 0) == 0) {
    censor = Censor::right;
    body = trim(body.substr(1));
  }
  return parse_int(body, value);
}

using ObsKey = std::tuple<int, int, Censor, Censor>;

std::vector<Observation> aggregate(const std::vector<Observation>& rows) {
  std::map<ObsKey, long long> merged;
  for (const auto& o : rows) merged[{o.mic, o.dia, o.mic_censor, o.dia_censor}] += o.count;
  std::vector<Observation> out;
  out.reserve(merged.size());
  for (const auto& [k, n] : merged) {
    Observation o;
    std::tie(o.mic, o.dia, o.mic_censor, o.dia_censor) = k;
    o.count = static_cast<int>(n);
    out.push_back(o);
  }
  return out;
}

}  // namespace

AssayDataset::AssayDataset(std::vector<Observation> observations, double sigma_m, double sigma_d,
                           std::string name)
    : sigma_m_(sigma_m), sigma_d_(sigma_d), name_(std::move(name)) {
  if (!(sigma_m > 0.0) || !(sigma_d > 0.0))
    throw ContractViolation("assay error SDs must be positive");
  for (const auto& o : observations)
    if (o.count < 1) throw ContractViolation("count must be >= 1");
  observations_ = aggregate(observations);
  if (observations_.empty()) throw ContractViolation("dataset holds no isolates");
}

std::size_t AssayDataset::total_count() const {
  std::size_t n = 0;
  for (const auto& o : observations_) n += static_cast<std::size_t>(o.count);
  return n;
}

int AssayDataset::min_mic() const {
  return std::min_element(observations_.begin(), observations_.end(),
                          [](const auto& a, const auto& b) { return a.mic < b.mic; })
      ->mic;
}

int AssayDataset::max_mic() const {
  return std::max_element(observations_.begin(), observations_.end(),
                          [](const auto& a, const auto& b) { return a.mic < b.mic; })
      ->mic;
}

std::string AssayDataset::to_csv() const {
  std::ostringstream os;
  os << "mic,dia,count,mic_censored,dia_censored\n";
  for (const auto& o : observations_)
    os << o.mic << ',' << o.dia << ',' << o.count << ',' << to_string(o.mic_censor) << ','
       << to_string(o.dia_censor) << '\n';
  return os.str();
}

std::string AssayDataset::digest() const {
  std::ostringstream os;
  os << to_csv() << std::setprecision(17) << "sigma_m=" << sigma_m_ << ";sigma_d=" << sigma_d_;
  return sha256_hex(os.str());
}

AssayDataset parse_dataset(const std::string& csv_text, double sigma_m, double sigma_d,
                           std::string name) {
  std::istringstream in(csv_text);
  std::string line;
  std::size_t row = 0;

  int col_mic = -1, col_dia = -1, col_count = -1, col_mc = -1, col_dc = -1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto header = split_csv_line(line);
    for (int i = 0; i < static_cast<int>(header.size()); ++i) {
      const auto& h = header[i];
      if (h == "mic") col_mic = i;
      else if (h == "dia") col_dia = i;
      else if (h == "count") col_count = i;
      else if (h == "mic_censored") col_mc = i;
      else if (h == "dia_censored") col_dc = i;
    }
    break;
  }
  if (col_mic < 0 || col_dia < 0 || col_count < 0)
    throw ParseError(row, "header must contain mic,dia,count");

  std::vector<Observation> rows;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto f = split_csv_line(line);
    auto field = [&](int col) -> std::string {
      return col >= 0 && col < static_cast<int>(f.size()) ? f[col] : std::string();
    };

    Observation o;
    Censor mic_prefix{}, dia_prefix{};
    if (!parse_assay_value(field(col_mic), o.mic, mic_prefix))
      throw ParseError(row, "mic '" + field(col_mic) + "' is not an integer");
    if (!parse_assay_value(field(col_dia), o.dia, dia_prefix))
      throw ParseError(row, "dia '" + field(col_dia) + "' is not an integer");
    if (!parse_int(field(col_count), o.count))
      throw ParseError(row, "count '" + field(col_count) + "' is not an integer");
    if (o.count < 1) throw ParseError(row, "count must be >= 1");
    try {
      o.mic_censor = parse_censor(field(col_mc));
      o.dia_censor = parse_censor(field(col_dc));
    } catch (const std::invalid_argument& e) {
      throw ParseError(row, e.what());
    }
    if (mic_prefix != Censor::none) o.mic_censor = mic_prefix;
    if (dia_prefix != Censor::none) o.dia_censor = dia_prefix;
    if (o.dia < kMinDia || o.dia > kMaxDia)
      throw ParseError(row, "dia " + std::to_string(o.dia) + " outside [" +
                                std::to_string(kMinDia) + ", " + std::to_string(kMaxDia) + "]");
    rows.push_back(o);
  }
  if (rows.empty()) throw ParseError(row, "no data rows");
  return AssayDataset(std::move(rows), sigma_m, sigma_d, std::move(name));
}

AssayDataset load_dataset(const std::filesystem::path& path, double sigma_m, double sigma_d) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_dataset(ss.str(), sigma_m, sigma_d, path.stem().string());
}

void save_dataset(const AssayDataset& data, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << data.to_csv();
}

MicBreakpoints::MicBreakpoints(int lower_, int upper_) : lower(lower_), upper(upper_) {
  if (lower >= upper) throw ContractViolation("MIC breakpoints need lower < upper");
}

TrueMicBreakpoints true_mic_breakpoints(const MicBreakpoints& bp) {
  return {bp.lower - 0.5, bp.upper - 0.5};
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr);
  std::ostringstream os;
  os << std::hex << std::setfill('0');
  for (unsigned int i = 0; i < len; ++i) os << std::setw(2) << static_cast<int>(md[i]);
  return os.str();
}

}  // namespace bpcal
