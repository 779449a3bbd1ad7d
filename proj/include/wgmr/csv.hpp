#pragma once

// Plot-ready text outputs. Numbers are written with std::to_chars (shortest
// round-trip form), so files do not depend on the process locale.

#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <stdexcept>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "wgmr/coinc.hpp"
#include "wgmr/fitting.hpp"

namespace wgmr::io {

class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr const char* kHistogramColumns =
    "bin_center_s,counts,error,normalized,normalized_error";

/// One row per bin; the columns are kHistogramColumns.
struct HistogramTable {
  std::vector<double> bin_center;
  std::vector<double> counts;
  std::vector<double> error;
  std::vector<double> normalized;
  std::vector<double> normalized_error;

  std::size_t size() const { return bin_center.size(); }
};

HistogramTable table_of(const coinc::NormalizedHistogram& hist);
HistogramTable table_of(const coinc::HomProfile& profile);

void write_histogram_csv(std::ostream& out, const HistogramTable& table);
HistogramTable read_histogram_csv(std::istream& in);

/// Normalized g2 curve for fitting; zero-error bins get the error of a single
/// count, recovered from the counts/normalized ratio.
fit::CurveData curve_of(const HistogramTable& table);

/// Two numeric columns after a header line.
std::vector<std::pair<double, double>> read_samples_csv(std::istream& in);

/// "# model <name>" and status lines, then "name value sigma" per parameter.
void write_fit_report(std::ostream& out, const fit::FitResult& fit,
                      const std::string& model);

struct FitReport {
  std::string model;
  fit::FitResult fit;
};

FitReport read_fit_report(std::istream& in);

std::string format_number(double value);

/// Open a file and add its name to errors.
template <typename Fn>
auto with_input(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return fn(in);
  } catch (const CsvError& e) {
    throw CsvError(path.string() + ": " + e.what());
  }
}

template <typename Fn>
void with_output(const std::filesystem::path& path, Fn&& fn) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  fn(out);
  out.flush();
  if (!out) throw std::runtime_error("write to " + path.string() + " failed");
}

}  // namespace wgmr::io
