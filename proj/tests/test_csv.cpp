#include <doctest.h>

#include <locale>
#include <sstream>

#include "wgmr/csv.hpp"

using namespace wgmr;
using namespace wgmr::io;

namespace {

struct CommaDecimal : std::numpunct<char> {
  char do_decimal_point() const override { return ','; }
  char do_thousands_sep() const override { return '.'; }
  std::string do_grouping() const override { return "\3"; }
};

coinc::NormalizedHistogram sample_histogram() {
  coinc::Histogram h(1e-9, -5e-9, 5e-9);
  for (int k = 0; k < 10; ++k) h.add_to_bin(std::size_t(k), std::uint64_t(k * k));
  return coinc::normalize_g2(h, 3.3e4, 1.7e4, 12.5);
}

fit::FitResult sample_fit() {
  fit::FitResult r;
  r.names = {"A", "tau_lead"};
  r.units = {"1", "s"};
  r.params = Eigen::Vector2d(33.9125, 4.7123e-8);
  r.sigmas = Eigen::Vector2d(0.25, 1.5e-10);
  r.residual_norm = 12.75;
  r.iterations = 9;
  r.converged = true;
  r.identifiable = false;
  return r;
}

}  // namespace

TEST_CASE("histogram CSV round trip") {
  const auto g = sample_histogram();
  const auto table = table_of(g);
  std::stringstream buf;
  write_histogram_csv(buf, table);
  const auto text = buf.str();
  CHECK(text.rfind("bin_center_s,counts,error,normalized,normalized_error\n", 0) == 0);
  const auto back = read_histogram_csv(buf);
  REQUIRE(back.size() == 10);
  for (std::size_t k = 0; k < 10; ++k) {
    CHECK(back.bin_center[k] == table.bin_center[k]);
    CHECK(back.counts[k] == table.counts[k]);
    CHECK(back.normalized[k] == table.normalized[k]);
    CHECK(back.normalized_error[k] == table.normalized_error[k]);
  }
}

TEST_CASE("output does not depend on the locale") {
  const auto table = table_of(sample_histogram());
  std::ostringstream plain;
  write_histogram_csv(plain, table);

  const auto previous = std::locale::global(std::locale(std::locale::classic(), new CommaDecimal));
  std::ostringstream localized;
  localized.imbue(std::locale());
  write_histogram_csv(localized, table);
  std::ostringstream report;
  report.imbue(std::locale());
  write_fit_report(report, sample_fit(), "g2_double_exp");
  std::locale::global(previous);

  CHECK(localized.str() == plain.str());
  CHECK(report.str().find("33.9125") != std::string::npos);
}

TEST_CASE("curve_of recovers single-count errors for empty bins") {
  const auto g = sample_histogram();
  const auto curve = curve_of(table_of(g));
  const auto direct = fit::from_normalized(g);
  REQUIRE(curve.size() == 10);
  for (Eigen::Index i = 0; i < 10; ++i) {
    CHECK(curve.x(i) == direct.x(i));
    CHECK(curve.y(i) == direct.y(i));
    CHECK(curve.sigma(i) == doctest::Approx(direct.sigma(i)).epsilon(1e-12));
  }
  CHECK(curve.sigma(0) == doctest::Approx(1 / g.expectation));
}

TEST_CASE("malformed CSV") {
  std::istringstream no_header("1,2,3,4,5\n");
  CHECK_THROWS_AS(read_histogram_csv(no_header), CsvError);
  std::istringstream short_row(std::string(kHistogramColumns) + "\n1,2,3\n");
  CHECK_THROWS_WITH_AS(read_histogram_csv(short_row), doctest::Contains("line 2"), CsvError);
  std::istringstream words(std::string(kHistogramColumns) + "\n1,2,x,4,5\n");
  CHECK_THROWS_AS(read_histogram_csv(words), CsvError);
  std::istringstream crlf(std::string(kHistogramColumns) + "\r\n1,2,3,4,5\r\n");
  CHECK(read_histogram_csv(crlf).size() == 1);
}

TEST_CASE("samples CSV") {
  std::istringstream in("frequency_hz,transmission\n-1e6,0.9\n0,0.75\n\n2e6,0.95\n");
  const auto s = read_samples_csv(in);
  REQUIRE(s.size() == 3);
  CHECK(s[0].first == -1e6);
  CHECK(s[1].second == 0.75);
  std::istringstream three("a,b,c\n");
  CHECK_THROWS_AS(read_samples_csv(three), CsvError);
  std::istringstream empty("");
  CHECK_THROWS_AS(read_samples_csv(empty), CsvError);
}

TEST_CASE("fit report round trip") {
  const auto fit = sample_fit();
  std::stringstream buf;
  write_fit_report(buf, fit, "g2_double_exp");
  const auto r = read_fit_report(buf);
  CHECK(r.model == "g2_double_exp");
  CHECK(r.fit.names == fit.names);
  CHECK(r.fit.units == fit.units);
  CHECK(r.fit.params == fit.params);
  CHECK(r.fit.sigmas == fit.sigmas);
  CHECK(r.fit.converged);
  CHECK(!r.fit.identifiable);
  CHECK(r.fit.iterations == 9);
  CHECK(r.fit.residual_norm == 12.75);
  CHECK(r.fit.value("tau_lead") == 4.7123e-8);

  std::istringstream no_model("A 1 2\n");
  CHECK_THROWS_AS(read_fit_report(no_model), CsvError);
  std::istringstream garbage("# model x\nA 1\n");
  CHECK_THROWS_AS(read_fit_report(garbage), CsvError);
}
