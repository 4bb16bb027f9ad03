#pragma once

// Observed MIC/DIA assay data and breakpoint conventions.

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace bpcal {

/// Base class for every error this library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file or request body.
class ParseError : public Error {
 public:
  ParseError(std::size_t row, const std::string& what);
  std::size_t row() const { return row_; }

 private:
  std::size_t row_;
};

/// A documented precondition was violated by the caller.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

enum class Censor : std::uint8_t { none, left, right };

const char* to_string(Censor c);
Censor parse_censor(const std::string& token);  // throws std::invalid_argument

inline constexpr double kDefaultSigmaM = 0.707;
inline constexpr double kDefaultSigmaD = 2.121;
inline constexpr int kMinDia = 6;
inline constexpr int kMaxDia = 60;

struct Observation {
  int mic = 0;  // log2 dilution units
  int dia = 0;  // mm
  int count = 1;
  Censor mic_censor = Censor::none;
  Censor dia_censor = Censor::none;

  friend bool operator==(const Observation&, const Observation&) = default;
};

/// Aggregated observations plus the known assay error SDs. Rows with the same
/// (mic, dia, censor flags) are merged, and rows are kept sorted by
/// (mic, dia, mic_censor, dia_censor), so two datasets with the same isolates
/// compare equal regardless of input order.
class AssayDataset {
 public:
  AssayDataset() = default;
  AssayDataset(std::vector<Observation> observations, double sigma_m, double sigma_d,
               std::string name = {});

  const std::vector<Observation>& observations() const { return observations_; }
  double sigma_m() const { return sigma_m_; }
  double sigma_d() const { return sigma_d_; }
  const std::string& name() const { return name_; }

  std::size_t total_count() const;
  int min_mic() const;
  int max_mic() const;
  /// Lowest observed MIC - 0.5 and highest + 0.5.
  double grid_lo() const { return min_mic() - 0.5; }
  double grid_hi() const { return max_mic() + 0.5; }

  /// Canonical CSV (header plus one row per aggregated observation).
  std::string to_csv() const;
  /// Hex SHA-256 of to_csv() together with the error SDs.
  std::string digest() const;

  friend bool operator==(const AssayDataset&, const AssayDataset&) = default;

 private:
  std::vector<Observation> observations_;
  double sigma_m_ = kDefaultSigmaM;
  double sigma_d_ = kDefaultSigmaD;
  std::string name_;
};

/// Parses the CSV format `mic,dia,count[,mic_censored,dia_censored]`. The mic
/// and dia columns also accept `<=V` (left censored) and `>V` / `>=V` (right
/// censored). DIA values must lie in [kMinDia, kMaxDia].
AssayDataset parse_dataset(const std::string& csv_text, double sigma_m = kDefaultSigmaM,
                           double sigma_d = kDefaultSigmaD, std::string name = {});

AssayDataset load_dataset(const std::filesystem::path& path, double sigma_m = kDefaultSigmaM,
                          double sigma_d = kDefaultSigmaD);

void save_dataset(const AssayDataset& data, const std::filesystem::path& path);

/// Assay-scale MIC breakpoints (M_L, M_U).
struct MicBreakpoints {
  int lower = 0;
  int upper = 1;
  MicBreakpoints() = default;
  MicBreakpoints(int lower_, int upper_);
  friend bool operator==(const MicBreakpoints&, const MicBreakpoints&) = default;
};

/// Breakpoints on the true (continuous) MIC scale.
struct TrueMicBreakpoints {
  double lower = 0.0;
  double upper = 0.0;
};

/// The assay rounds MIC up, so the true breakpoints sit half a dilution below.
TrueMicBreakpoints true_mic_breakpoints(const MicBreakpoints& bp);

/// DIA breakpoints in mm: lower = resistant boundary, upper = susceptible.
struct DiaBreakpoints {
  int lower = 0;
  int upper = 1;
  friend bool operator==(const DiaBreakpoints&, const DiaBreakpoints&) = default;
  friend auto operator<=>(const DiaBreakpoints&, const DiaBreakpoints&) = default;
};

/// Hex SHA-256 of arbitrary bytes.
std::string sha256_hex(const std::string& bytes);

}  // namespace bpcal
