#include "wgmr/csv.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "wgmr/config.hpp"

namespace wgmr::io {
namespace {

double parse_number(std::string_view text, std::size_t line) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t'))
    text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r'))
    text.remove_suffix(1);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw CsvError("line " + std::to_string(line) + ": '" + std::string(text) +
                   "' is not a number");
  return v;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  for (;;) {
    const auto at = line.find(sep);
    out.push_back(line.substr(0, at));
    if (at == std::string_view::npos) return out;
    line.remove_prefix(at + 1);
  }
}

std::string_view chomp(std::string_view s) {
  if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  return s;
}

}  // namespace

std::string format_number(double value) { return sim::format_double(value); }

HistogramTable table_of(const coinc::NormalizedHistogram& hist) {
  HistogramTable t;
  for (std::size_t k = 0; k < hist.raw.size(); ++k) {
    t.bin_center.push_back(hist.raw.bin_center(k));
    t.counts.push_back(double(hist.raw.counts()[k]));
    t.error.push_back(hist.raw.error(k));
    t.normalized.push_back(hist.values[k]);
    t.normalized_error.push_back(hist.errors[k]);
  }
  return t;
}

HistogramTable table_of(const coinc::HomProfile& profile) {
  HistogramTable t;
  for (std::size_t k = 0; k < profile.histogram.size(); ++k) {
    t.bin_center.push_back(profile.histogram.bin_center(k));
    t.counts.push_back(double(profile.histogram.counts()[k]));
    t.error.push_back(profile.histogram.error(k));
    t.normalized.push_back(profile.normalized[k]);
    t.normalized_error.push_back(profile.normalized_errors[k]);
  }
  return t;
}

void write_histogram_csv(std::ostream& out, const HistogramTable& t) {
  out << kHistogramColumns << '\n';
  for (std::size_t k = 0; k < t.size(); ++k)
    out << format_number(t.bin_center[k]) << ',' << format_number(t.counts[k]) << ','
        << format_number(t.error[k]) << ',' << format_number(t.normalized[k]) << ','
        << format_number(t.normalized_error[k]) << '\n';
}

HistogramTable read_histogram_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || chomp(line) != kHistogramColumns)
    throw CsvError(std::string("expected header '") + kHistogramColumns + "'");
  HistogramTable t;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (chomp(line).empty()) continue;
    const auto cells = split(chomp(line), ',');
    if (cells.size() != 5)
      throw CsvError("line " + std::to_string(line_no) + ": expected 5 columns");
    t.bin_center.push_back(parse_number(cells[0], line_no));
    t.counts.push_back(parse_number(cells[1], line_no));
    t.error.push_back(parse_number(cells[2], line_no));
    t.normalized.push_back(parse_number(cells[3], line_no));
    t.normalized_error.push_back(parse_number(cells[4], line_no));
  }
  return t;
}

fit::CurveData curve_of(const HistogramTable& t) {
  const auto n = Eigen::Index(t.size());
  fit::CurveData d;
  d.x.resize(n);
  d.y.resize(n);
  d.sigma.resize(n);
  double per_count = 0;  // normalized value of a single count
  for (std::size_t k = 0; k < t.size() && per_count == 0; ++k)
    if (t.counts[k] > 0 && t.normalized[k] > 0) per_count = t.normalized[k] / t.counts[k];
  for (std::size_t k = 0; k < t.size(); ++k) {
    const auto i = Eigen::Index(k);
    d.x(i) = t.bin_center[k];
    d.y(i) = t.normalized[k];
    d.sigma(i) = t.normalized_error[k] > 0 ? t.normalized_error[k]
                 : per_count > 0           ? per_count
                                           : 1.0;
  }
  return d;
}

std::vector<std::pair<double, double>> read_samples_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw CsvError("empty samples file");
  if (split(chomp(line), ',').size() != 2)
    throw CsvError("expected a two-column header line");
  std::vector<std::pair<double, double>> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (chomp(line).empty()) continue;
    const auto cells = split(chomp(line), ',');
    if (cells.size() != 2)
      throw CsvError("line " + std::to_string(line_no) + ": expected 2 columns");
    out.emplace_back(parse_number(cells[0], line_no), parse_number(cells[1], line_no));
  }
  return out;
}

void write_fit_report(std::ostream& out, const fit::FitResult& fit,
                      const std::string& model) {
  out << "# model " << model << '\n'
      << "# converged " << (fit.converged ? 1 : 0) << '\n'
      << "# identifiable " << (fit.identifiable ? 1 : 0) << '\n'
      << "# iterations " << fit.iterations << '\n'
      << "# residual_norm " << format_number(fit.residual_norm) << '\n'
      << "# units";
  for (const auto& u : fit.units) out << ' ' << u;
  out << '\n';
  for (std::size_t k = 0; k < fit.names.size(); ++k)
    out << fit.names[k] << ' ' << format_number(fit.params(Eigen::Index(k))) << ' '
        << format_number(fit.sigmas(Eigen::Index(k))) << '\n';
}

FitReport read_fit_report(std::istream& in) {
  FitReport r;
  std::vector<double> values, sigmas;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields{std::string(chomp(line))};
    std::string key;
    if (!(fields >> key)) continue;
    if (key == "#") {
      std::string what, rest;
      fields >> what;
      if (what == "units") {
        std::string u;
        while (fields >> u) r.fit.units.push_back(u);
        continue;
      }
      fields >> rest;
      if (what == "model") r.model = rest;
      else if (what == "converged") r.fit.converged = rest == "1";
      else if (what == "identifiable") r.fit.identifiable = rest == "1";
      else if (what == "iterations") r.fit.iterations = int(parse_number(rest, line_no));
      else if (what == "residual_norm") r.fit.residual_norm = parse_number(rest, line_no);
      continue;
    }
    std::string value, sigma, extra;
    if (!(fields >> value >> sigma) || (fields >> extra))
      throw CsvError("line " + std::to_string(line_no) + ": expected 'name value sigma'");
    r.fit.names.push_back(key);
    values.push_back(parse_number(value, line_no));
    sigmas.push_back(parse_number(sigma, line_no));
  }
  if (r.model.empty()) throw CsvError("fit report has no '# model' line");
  r.fit.params = Eigen::Map<Eigen::VectorXd>(values.data(), Eigen::Index(values.size()));
  r.fit.sigmas = Eigen::Map<Eigen::VectorXd>(sigmas.data(), Eigen::Index(sigmas.size()));
  return r;
}

}  // namespace wgmr::io
