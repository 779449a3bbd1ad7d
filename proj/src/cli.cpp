#include "wgmr/cli.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "wgmr/coinc.hpp"
#include "wgmr/config.hpp"
#include "wgmr/csv.hpp"
#include "wgmr/fitting.hpp"
#include "wgmr/phys.hpp"
#include "wgmr/source_sim.hpp"
#include "wgmr/tag_file.hpp"

namespace wgmr::cli {
namespace {

using sim::Dimension;

// Raised for semantically bad arguments that CLI11 cannot catch itself.
struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

double quantity(const std::string& text, Dimension d, const char* flag) {
  try {
    return sim::parse_quantity(text, d);
  } catch (const sim::ConfigError& e) {
    throw UsageError(std::string(flag) + ": " + e.what());
  }
}

double positive_quantity(const std::string& text, Dimension d, const char* flag) {
  const double v = quantity(text, d, flag);
  if (!(v > 0)) throw UsageError(std::string(flag) + " must be positive");
  return v;
}

Channel channel(const std::string& name, const char* flag) {
  if (auto ch = parse_channel(name)) return *ch;
  throw UsageError(std::string(flag) + ": unknown channel '" + name +
                   "' (expected S1, S2, I_CW or I_CCW)");
}

std::string fixed(double v, int digits) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, digits);
  return ec == std::errc() ? std::string(buf, ptr) : std::string("nan");
}

unsigned worker_count(int workers) {
  if (workers < 1) throw UsageError("--workers must be at least 1");
  return unsigned(workers);
}

// Window conventions: [-2 tau_lead, +2 tau_tail] and a plateau beyond
// 5 tau_tail, i.e. 2.5 signal tail windows.
constexpr double kPlateauTailWindows = 2.5;

void write_table(const std::string& path, const io::HistogramTable& table,
                 std::ostream& out) {
  if (path.empty() || path == "-")
    io::write_histogram_csv(out, table);
  else
    io::with_output(path, [&](std::ostream& f) { io::write_histogram_csv(f, table); });
}

template <typename Fn>
void emit(const std::string& path, std::ostream& out, Fn&& fn) {
  if (path.empty() || path == "-")
    fn(out);
  else
    io::with_output(path, fn);
}

coinc::NormalizedHistogram g2_from_times(const ChannelTimes& times, Channel a, Channel b,
                                         double bin, double range, unsigned workers) {
  const auto hist = coinc::cross_correlate(times, a, b, bin, -range, range, workers);
  const double duration = double(times.duration_ps) * 1e-12;
  return coinc::normalize_g2(hist, double(times[a].size()) / duration,
                             double(times[b].size()) / duration, duration);
}

// Fitted wavepacket from the two heralded cross-correlations of a run.
phys::WavepacketModel fitted_wavepacket(const ChannelTimes& times, unsigned workers) {
  double lead = 0, tail = 0;
  for (auto [a, b] : {std::pair{Channel::I_CW, Channel::S1},
                      std::pair{Channel::I_CCW, Channel::S2}}) {
    const auto fit = fit::fit_g2_double_exp(g2_from_times(times, a, b, 1e-9, 400e-9, workers));
    if (!fit.ok())
      throw std::runtime_error(std::string("--auto-windows: g2 fit of ") +
                               std::string(channel_name(a)) + "/" +
                               std::string(channel_name(b)) + " did not converge");
    lead += 0.5 * fit.value("tau_lead");
    tail += 0.5 * fit.value("tau_tail");
  }
  return {lead, tail};
}

struct Visibility {
  coinc::HomProfile profile;
  coinc::VisibilityEstimate v;
  std::size_t events = 0;
};

Visibility hom_visibility(const ChannelTimes& times, const coinc::FourfoldConfig& cfg,
                          double plateau) {
  const auto events = coinc::find_fourfold(times, cfg);
  Visibility r;
  r.events = events.size();
  r.profile = coinc::hom_profile(events, cfg, plateau);
  r.v = coinc::visibility(r.profile);
  return r;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::string_view rest = text;
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    out.push_back(quantity(std::string(rest.substr(0, comma)), Dimension::Dimensionless,
                           "--targets"));
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  if (out.empty()) throw UsageError("--targets is empty");
  return out;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Heralded two-source HOM simulation and time-tag analysis"};
  app.name("wgmr");
  app.require_subcommand(1);
  app.fallthrough();
  app.set_help_all_flag("--help-all", "Expand all help");

  int workers = 1;
  app.add_option("--workers", workers, "Worker threads (results do not depend on it)")
      ->capture_default_str();

  // simulate
  std::string config_path, tags_out;
  auto* simulate = app.add_subcommand("simulate", "Simulate a run into a tag file");
  simulate->add_option("--config", config_path, "Experiment config file")->required();
  simulate->add_option("--out", tags_out, "Output tag file")->required();

  // g2
  std::string tags_in, ch_a = "I_CW", ch_b = "S1", bin = "1ns", range = "400ns", csv_out;
  auto* g2 = app.add_subcommand("g2", "Normalized cross-correlation histogram");
  g2->add_option("--tags", tags_in, "Input tag file")->required();
  g2->add_option("--a", ch_a, "Start channel")->capture_default_str();
  g2->add_option("--b", ch_b, "Stop channel")->capture_default_str();
  g2->add_option("--bin", bin, "Bin width")->capture_default_str();
  g2->add_option("--range", range, "Delay half range")->capture_default_str();
  g2->add_option("--out", csv_out, "Output CSV ('-' for stdout)");

  // fitg2
  std::string hist_in, report_out;
  auto* fitg2 = app.add_subcommand("fitg2", "Double-exponential fit of a g2 histogram");
  fitg2->add_option("--hist", hist_in, "Histogram CSV from 'g2'")->required();
  fitg2->add_option("--out", report_out, "Fit report ('-' for stdout)");

  // fourfold
  bool auto_windows = false;
  std::string lead = "94ns", tail = "132ns", idler_window = "400ns", ff_bin = "25ns",
              plateau;
  auto* fourfold = app.add_subcommand("fourfold", "Four-fold HOM profile");
  fourfold->add_option("--tags", tags_in, "Input tag file")->required();
  auto* auto_flag = fourfold->add_flag("--auto-windows", auto_windows,
                                       "Signal windows from fitted decay times");
  fourfold->add_option("--lead", lead, "Signal window before the idler")
      ->capture_default_str()
      ->excludes(auto_flag);
  fourfold->add_option("--tail", tail, "Signal window after the idler")
      ->capture_default_str()
      ->excludes(auto_flag);
  fourfold->add_option("--idler-window", idler_window, "Idler delay half range")
      ->capture_default_str();
  fourfold->add_option("--bin", ff_bin, "Profile bin width")->capture_default_str();
  fourfold->add_option("--plateau", plateau,
                       "Plateau threshold on |delay| (default 5 tau_tail)");
  fourfold->add_option("--out", csv_out, "Profile CSV ('-' for stdout)");

  // visibility
  std::string profile_in;
  auto* vis = app.add_subcommand("visibility", "Visibility from a HOM profile CSV");
  vis->add_option("--profile", profile_in, "Profile CSV from 'fourfold'")->required();

  // sweep-g2
  std::string targets, sweep_duration = "60s";
  double sweep_m = 0.86, sweep_eta = 0.25;
  std::uint64_t seed = 1;
  auto* sweep = app.add_subcommand("sweep-g2", "Visibility against g2(0) by simulation");
  sweep->add_option("--targets", targets, "Comma separated g2(0) targets")->required();
  sweep->add_option("--m", sweep_m, "Mode overlap amplitude")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  sweep->add_option("--eta", sweep_eta, "Detection efficiency of every channel")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  sweep->add_option("--duration", sweep_duration, "Simulated time per target")
      ->capture_default_str();
  sweep->add_option("--seed", seed, "Random seed")->capture_default_str();
  sweep->add_option("--out", csv_out, "Output CSV ('-' for stdout)");

  // similarity
  std::string fit_a, fit_b;
  auto* similar = app.add_subcommand("similarity", "Temporal-mode similarity of two g2 fits");
  similar->add_option("--fit-a", fit_a, "Fit report")->required();
  similar->add_option("--fit-b", fit_b, "Fit report")->required();

  // predict
  std::string p_lead = "47ns", p_tail = "66ns", p_step = "1ns";
  double p_m = 0.86, p_g2 = 35;
  auto* predict = app.add_subcommand("predict", "Theoretical HOM dip");
  predict->add_option("--tau-lead", p_lead, "Lead decay time")->capture_default_str();
  predict->add_option("--tau-tail", p_tail, "Tail decay time")->capture_default_str();
  predict->add_option("--m", p_m, "Mode overlap amplitude")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  predict->add_option("--g2", p_g2, "Peak g2(0)")->capture_default_str();
  predict->add_option("--range", range, "Delay half range")->capture_default_str();
  predict->add_option("--step", p_step, "Delay step")->capture_default_str();
  predict->add_option("--out", csv_out, "Output CSV ('-' for stdout)");

  // fringe / spectrum
  std::string samples_in;
  auto* fringe = app.add_subcommand("fringe", "Sinusoidal fit of a classical fringe");
  fringe->add_option("--samples", samples_in, "Two-column CSV (abscissa, intensity)")
      ->required();
  fringe->add_option("--out", report_out, "Fit report ('-' for stdout)");
  auto* spectrum = app.add_subcommand("spectrum", "Lorentzian fit of a reflected pump dip");
  spectrum->add_option("--samples", samples_in, "Two-column CSV (frequency, power)")
      ->required();
  spectrum->add_option("--out", report_out, "Fit report ('-' for stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    const unsigned nworkers = worker_count(workers);

    if (*simulate) {
      const auto config = sim::load_config(config_path);
      const auto stream = sim::simulate_run(config, nworkers);
      const auto bytes = io::write_tags(stream, tags_out);
      out << "tags " << stream.tags.size() << " bytes " << bytes << '\n';
    } else if (*g2) {
      const Channel a = channel(ch_a, "--a"), b = channel(ch_b, "--b");
      if (a == b) throw UsageError("--a and --b must differ");
      const double bw = positive_quantity(bin, Dimension::Time, "--bin");
      const double r = positive_quantity(range, Dimension::Time, "--range");
      io::HistogramTable table;
      if (nworkers == 1) {
        // Streamed: memory stays bounded whatever the file size.
        std::ifstream in(tags_in, std::ios::binary);
        if (!in) throw std::runtime_error("cannot open " + tags_in);
        io::TagReader reader(in);
        coinc::CrossCorrelator cc(a, b, bw, -r, r);
        std::vector<TimeTag> chunk;
        while (reader.next(chunk)) cc.push(chunk);
        const double duration = reader.header().duration_seconds();
        table = io::table_of(coinc::normalize_g2(cc.histogram(), double(cc.singles(a)) / duration,
                                                 double(cc.singles(b)) / duration, duration));
      } else {
        table = io::table_of(g2_from_times(io::read_channel_times(tags_in), a, b, bw, r, nworkers));
      }
      write_table(csv_out, table, out);
    } else if (*fitg2) {
      const auto table = io::with_input(hist_in, io::read_histogram_csv);
      const auto fit = fit::fit_g2_double_exp(io::curve_of(table));
      emit(report_out, out, [&](std::ostream& o) { io::write_fit_report(o, fit, "g2_double_exp"); });
      if (!fit.ok()) err << "warning: g2 fit " << (fit.converged ? "is not identifiable" : "did not converge") << '\n';
    } else if (*fourfold) {
      const auto times = io::read_channel_times(tags_in);
      coinc::FourfoldConfig cfg;
      cfg.idler_window = positive_quantity(idler_window, Dimension::Time, "--idler-window");
      cfg.bin_width = positive_quantity(ff_bin, Dimension::Time, "--bin");
      if (auto_windows) {
        const auto wp = fitted_wavepacket(times, nworkers);
        cfg = coinc::FourfoldConfig::from_wavepacket(wp, cfg.idler_window, cfg.bin_width);
        err << "windows: lead " << fixed(cfg.signal_window_lead * 1e9, 1) << " ns, tail "
            << fixed(cfg.signal_window_tail * 1e9, 1) << " ns\n";
      } else {
        cfg.signal_window_lead = positive_quantity(lead, Dimension::Time, "--lead");
        cfg.signal_window_tail = positive_quantity(tail, Dimension::Time, "--tail");
      }
      const double threshold = plateau.empty()
                                   ? kPlateauTailWindows * cfg.signal_window_tail
                                   : positive_quantity(plateau, Dimension::Time, "--plateau");
      const auto r = hom_visibility(times, cfg, threshold);
      write_table(csv_out, io::table_of(r.profile), out);
      err << "fourfolds " << r.events << " V=" << fixed(r.v.value, 3) << " sigma="
          << fixed(r.v.sigma, 3) << '\n';
    } else if (*vis) {
      const auto table = io::with_input(profile_in, io::read_histogram_csv);
      const auto v = coinc::visibility(table.bin_center, table.normalized, table.normalized_error);
      out << "V=" << fixed(v.value, 3) << " sigma=" << fixed(v.sigma, 3) << '\n';
    } else if (*sweep) {
      const auto list = parse_list(targets);
      const double duration = positive_quantity(sweep_duration, Dimension::Time, "--duration");
      auto writer = [&](std::ostream& o) {
        o << "g2_target,visibility,sigma,fourfolds,predicted\n";
        for (double target : list) {
          if (!(target > 1)) throw UsageError("--targets must all exceed 1");
          auto config = sim::reference_config(target, sweep_m, duration, seed);
          for (auto* s : {&config.cw, &config.ccw}) s->eta_signal = s->eta_idler = sweep_eta;
          const auto times = ChannelTimes::from_stream(sim::simulate_run(config, nworkers));
          coinc::FourfoldConfig cfg = coinc::FourfoldConfig::from_wavepacket(config.cw.wavepacket);
          const auto r = hom_visibility(times, cfg, kPlateauTailWindows * cfg.signal_window_tail);
          o << io::format_number(target) << ',' << io::format_number(r.v.value) << ','
            << io::format_number(r.v.sigma) << ',' << r.events << ','
            << io::format_number(phys::zero_delay_visibility(sweep_m, target)) << '\n';
        }
      };
      emit(csv_out, out, writer);
    } else if (*similar) {
      auto load = [](const std::string& path) {
        const auto report = io::with_input(path, io::read_fit_report);
        if (report.model != "g2_double_exp")
          throw std::runtime_error(path + ": not a g2 fit report");
        if (!report.fit.ok())
          throw std::runtime_error(path + ": fit did not converge or is not identifiable");
        return fit::g2_model_from_fit(report.fit);
      };
      const double s = fit::similarity(load(fit_a), load(fit_b));
      out << "S=" << fixed(s, 6) << '\n';
    } else if (*predict) {
      phys::WavepacketModel wp{positive_quantity(p_lead, Dimension::Time, "--tau-lead"),
                               positive_quantity(p_tail, Dimension::Time, "--tau-tail")};
      if (!(p_g2 > 1)) throw UsageError("--g2 must exceed 1");
      const double r = positive_quantity(range, Dimension::Time, "--range");
      const double step = positive_quantity(p_step, Dimension::Time, "--step");
      const auto n = static_cast<long>(std::floor(r / step + 1e-9));
      const std::int64_t step_ps = to_picoseconds(step);
      if (step_ps < 1) throw UsageError("--step must be at least 1 ps");
      auto writer = [&](std::ostream& o) {
        o << "delta_s,normalized\n";
        for (long k = -n; k <= n; ++k) {
          // Integer picoseconds keep the printed delays free of round-off.
          const double d = double(k * step_ps) / 1e12;
          o << io::format_number(d) << ','
            << io::format_number(phys::predict_hom_dip(wp, p_m, p_g2, d)) << '\n';
        }
      };
      emit(csv_out, out, writer);
      err << "V0=" << fixed(phys::zero_delay_visibility(p_m, p_g2), 3) << '\n';
    } else if (*fringe || *spectrum) {
      const auto samples = io::with_input(samples_in, io::read_samples_csv);
      const auto data = fit::from_samples(samples);
      const auto fit = *fringe ? fit::fit_fringe(data) : fit::fit_lorentzian_dip(data);
      const char* model = *fringe ? "fringe" : "lorentzian_dip";
      emit(report_out, out, [&](std::ostream& o) { io::write_fit_report(o, fit, model); });
      if (!fit.ok()) err << "warning: " << model << " fit " << (fit.converged ? "is not identifiable" : "did not converge") << '\n';
    }
    return kExitOk;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitDataError;
  }
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("wgmr");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(int(argv.size()), argv.data(), out, err);
}

}  // namespace wgmr::cli
