#include <fmt/format.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "twpac/cme.hpp"
#include "twpac/config.hpp"
#include "twpac/constants.hpp"
#include "twpac/device.hpp"
#include "twpac/dispersion.hpp"
#include "twpac/errors.hpp"
#include "twpac/noisecal.hpp"
#include "twpac/output.hpp"
#include "twpac/parallel.hpp"
#include "twpac/phasematch.hpp"
#include "twpac/transient.hpp"

namespace fs = std::filesystem;
using namespace twpac;
using cli::Panel;
using cli::Table;
using cli::Trace;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

double w_of(double ghz) { return units::ghz_to_omega(ghz); }
double ghz_of(double w) { return units::omega_to_ghz(w); }
const double kNaN = std::numeric_limits<double>::quiet_NaN();

struct DeviceArgs {
    std::string path;
    double bias_ua = kNaN;
    double loss_tangent = kNaN;
    int cells = 0;
    bool no_rpm = false;

    void attach(CLI::App* app) {
        app->add_option("--device", path, "device config (.toml or .json)")->required();
        app->add_option("--bias-ua", bias_ua, "operating dc bias, uA (default: config value)");
        app->add_option("--loss-tangent", loss_tangent, "override the dielectric loss tangent");
        app->add_option("--cells-override", cells, "reduced cell count, a multiple of the supercell length");
        app->add_flag("--no-rpm", no_rpm, "remove the resonant shunts");
    }

    [[nodiscard]] device::DeviceSpec load() const {
        auto d = cli::load_device(path);
        if (!std::isnan(bias_ua)) d.bias.dc_current = bias_ua * units::uA;
        if (!std::isnan(loss_tangent)) d.loss_tangent = loss_tangent;
        if (no_rpm) d.rpm_enabled = false;
        if (cells > 0) d = transient::with_cells(d, cells);
        d.validate();
        return d;
    }
};

struct Sweep {
    double fmin = 3.0;
    double fmax = 12.0;
    double step = 0.02;
    void attach(CLI::App* app, double lo, double hi, double st) {
        fmin = lo;
        fmax = hi;
        step = st;
        app->add_option("--fmin", fmin, "first signal frequency, GHz")->capture_default_str();
        app->add_option("--fmax", fmax, "last signal frequency, GHz")->capture_default_str();
        app->add_option("--step", step, "signal step, GHz")->capture_default_str();
    }
    [[nodiscard]] std::vector<double> omegas() const {
        if (!(step > 0.0) || fmax < fmin) throw ConfigError("invalid sweep: need step > 0 and fmax >= fmin");
        std::vector<double> w;
        for (double f : dispersion::frequency_grid(fmin * 1e9, fmax * 1e9, step * 1e9)) w.push_back(constants::two_pi * f);
        return w;
    }
};

struct Pumps {
    double fa = 14.27;
    double pa = -73.0;
    double fc = 4.7;
    double pc = -73.0;
    bool fc_off = false;
    bool pa_off = false;
    void attach(CLI::App* app) {
        app->add_option("--fa-ghz", fa, "PA pump frequency, GHz")->capture_default_str();
        app->add_option("--pa-dbm", pa, "PA pump power at the chip input, dBm")->capture_default_str();
        app->add_option("--fc-ghz", fc, "FC pump frequency, GHz")->capture_default_str();
        app->add_option("--pc-dbm", pc, "FC pump power at the chip input, dBm")->capture_default_str();
        app->add_flag("--fc-off", fc_off, "disable the frequency-conversion pump");
        app->add_flag("--pa-off", pa_off, "disable the amplification pump");
    }
};

struct Global {
    int workers = default_workers();
    std::string out_dir;
    bool svg = false;
};

fs::path prepare_out(const Global& g) {
    const fs::path dir = cli::output_directory(g.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory '" + dir.string() + "': " + ec.message());
    return dir;
}

/// Every option given on the command line, for the manifest.
std::map<std::string, std::string> given_options(const CLI::App* sub) {
    std::map<std::string, std::string> p;
    for (const CLI::Option* o : sub->get_options()) {
        if (o->count() == 0 || o->get_name() == "--help" || o->get_name() == "--device") continue;
        const auto res = o->results();
        std::string v;
        for (std::size_t k = 0; k < res.size(); ++k) v += (k ? " " : "") + res[k];
        if (o->get_expected_min() == 0) v = "true";
        p[o->get_name()] = v;
    }
    return p;
}

void finish(const fs::path& dir, const std::string& subcommand, const std::string& device_path,
            const std::map<std::string, std::string>& params, unsigned long long seed = 0) {
    cli::RunManifest m;
    m.device_config = device_path;
    m.subcommand = subcommand;
    m.parameters = params;
    m.output_directory = dir.string();
    m.seed = seed;
    m.version = cli::version();
    cli::write_manifest(m, dir / "manifest.json");
}

double db10(double x) { return 10.0 * std::log10(x); }
double db20(std::complex<double> z) { return 20.0 * std::log10(std::abs(z)); }

int run_dispersion(const DeviceArgs& da, double fmin, double fmax, double step_mhz, double threshold,
                   const Global& g, const std::map<std::string, std::string>& params) {
    const auto dev = da.load();
    const auto prof = device::build_cell_array(dev);
    dispersion::DispersionOptions o;
    o.f_min = fmin * 1e9;
    o.f_max = fmax * 1e9;
    o.f_step = step_mhz * 1e6;
    o.threshold_db = threshold;
    const auto table = dispersion::compute_table(dev, prof, o);
    const auto dir = prepare_out(g);
    Table t{{"freq_GHz", "s21_db", "s21_phase_rad", "k_rad_per_cell", "kstar_rad_per_cell", "re_Z_ohm", "im_Z_ohm",
             "alpha_np_per_cell"},
            {}};
    for (const auto& p : table.points) {
        t.rows.push_back({ghz_of(p.omega), db20(p.s21), std::arg(p.s21), p.k, p.k_star, p.impedance.real(),
                          p.impedance.imag(), p.attenuation});
    }
    cli::emit_csv(t, dir / "dispersion.csv");
    Table sb{{"lo_GHz", "hi_GHz", "center_GHz"}, {}};
    for (const auto& s : table.stopbands) sb.rows.push_back({ghz_of(s.omega_lo), ghz_of(s.omega_hi), ghz_of(s.center())});
    if (!sb.rows.empty()) cli::emit_csv(sb, dir / "stopbands.csv");
    for (const auto& s : table.stopbands)
        fmt::print("stopband {:.3f} - {:.3f} GHz (center {:.3f})\n", ghz_of(s.omega_lo), ghz_of(s.omega_hi), ghz_of(s.center()));
    fmt::print("phase velocity {:.2f} cells/ns\n", table.phase_velocity * 1e-9);
    if (g.svg) {
        Trace s21{"|S21|", {}, {}, ""}, ks{"k*", {}, {}, ""}, zr{"Re Z", {}, {}, ""}, zi{"Im Z", {}, {}, ""};
        for (const auto& r : t.rows) {
            s21.x.push_back(r[0]);
            s21.y.push_back(r[1]);
            ks.x.push_back(r[0]);
            ks.y.push_back(r[4]);
            zr.x.push_back(r[0]);
            zr.y.push_back(r[5]);
            zi.x.push_back(r[0]);
            zi.y.push_back(r[6]);
        }
        cli::emit_svg({{"transmission", "frequency (GHz)", "dB", {s21}},
                       {"dispersion relative to the linear line", "frequency (GHz)", "rad/cell", {ks}},
                       {"Bloch impedance", "frequency (GHz)", "ohm", {zr, zi}}},
                      dir / "dispersion.svg");
    }
    finish(dir, "dispersion", da.path, params);
    return 0;
}

int run_cme(const DeviceArgs& da, const Pumps& pumps, const Sweep& sw, const std::string& direction, bool no4wm,
            bool no_refl, bool complex_gamma, double signal_dbm, const Global& g,
            const std::map<std::string, std::string>& params) {
    const auto dev = da.load();
    const auto prof = device::build_cell_array(dev);
    const auto omegas = sw.omegas();
    // Highest generated mode is the up-converted one at omega_s + omega_c.
    const double f_top = std::max({sw.fmax + pumps.fc, pumps.fa, 2.0 * pumps.fc}) + 1.0;
    const auto table = cme::cme_dispersion(dev, prof, f_top * 1e9);
    cme::DriveConfig drive;
    drive.pa = {w_of(pumps.fa), pumps.pa_off ? -400.0 : pumps.pa};
    drive.pa_enabled = !pumps.pa_off;
    drive.fc = {w_of(pumps.fc), pumps.fc_off ? -400.0 : pumps.pc};
    drive.fc_enabled = !pumps.fc_off;
    drive.signal = {omegas.front(), signal_dbm};
    for (const auto& w : cme::drive_warnings(drive)) fmt::print(stderr, "warning: {}\n", w);
    cme::CmeOptions opt;
    opt.include_4wm = !no4wm;
    opt.include_reflections = !no_refl;
    opt.complex_gamma = complex_gamma;

    std::vector<cme::Direction> dirs;
    if (direction == "forward" || direction == "both") dirs.push_back(cme::Direction::forward);
    if (direction == "backward" || direction == "both") dirs.push_back(cme::Direction::backward);
    const auto dir = prepare_out(g);
    std::vector<Trace> traces;
    std::size_t failed = 0, total = 0;
    for (const auto d : dirs) {
        const auto res = cme::sweep_spectrum(dev, table, drive, omegas, d, opt, g.workers);
        const std::string name = d == cme::Direction::forward ? "forward" : "backward";
        Table t{{"freq_GHz", "gain_db"}, {}};
        for (int m = 0; m < cme::kModes; ++m)
            t.header.push_back(fmt::format("P_{}_dbm", cme::mode_name(static_cast<cme::Mode>(m))));
        Trace tr{name, {}, {}, ""};
        for (const auto& p : res.points) {
            ++total;
            std::vector<double> row{ghz_of(p.omega), p.ok ? p.gain_db : kNaN};
            for (double v : p.terminal_power_dbm) row.push_back(p.ok ? v : kNaN);
            t.rows.push_back(row);
            if (!p.ok) {
                ++failed;
                fmt::print(stderr, "{} {:.4f} GHz: {}\n", name, ghz_of(p.omega), p.error);
            }
            tr.x.push_back(row[0]);
            tr.y.push_back(row[1]);
        }
        cli::emit_csv(t, dir / ("cme_" + name + ".csv"));
        traces.push_back(tr);
    }
    if (g.svg) cli::emit_svg({{"CME signal gain", "frequency (GHz)", "dB", traces}}, dir / "cme_sweep.svg");
    finish(dir, "cme-sweep", da.path, params);
    if (failed == total) {
        fmt::print(stderr, "every sweep point failed\n");
        return kExitNumerical;
    }
    return 0;
}

transient::TransientDrive transient_drive(const device::DeviceSpec& dev, const Pumps& pumps, double signal_ua,
                                          int spp) {
    transient::TransientDrive d;
    d.dc_bias = dev.bias.dc_current;
    d.pa_enabled = !pumps.pa_off;
    d.pa_omega = w_of(pumps.fa);
    d.pa_power_dbm = pumps.pa;
    d.fc_enabled = !pumps.fc_off;
    d.fc_omega = w_of(pumps.fc);
    d.fc_power_dbm = pumps.pc;
    d.signal_amplitude = signal_ua * units::uA;
    d.samples_per_period = spp;
    return d;
}

int run_transient_sweep(const DeviceArgs& da, const Pumps& pumps, const Sweep& sw, double signal_ua, int spp,
                        bool forward_only, const Global& g, const std::map<std::string, std::string>& params) {
    const auto dev = da.load();
    const auto prof = device::build_cell_array(dev);
    const auto drive = transient_drive(dev, pumps, signal_ua, spp);
    const auto omegas = sw.omegas();
    const auto pts = transient::sweep_transient(dev, prof, drive, omegas, !forward_only, g.workers);
    const auto dir = prepare_out(g);
    Table t{{"freq_GHz", "s21_fwd_db", "s21_bwd_db"}, {}};
    Trace f{"forward", {}, {}, ""}, b{"backward", {}, {}, ""};
    std::size_t failed = 0;
    for (const auto& p : pts) {
        const double fd = p.ok ? db20(p.s21_forward) : kNaN;
        const double bd = p.ok && !forward_only ? db20(p.s21_backward) : kNaN;
        if (!p.ok) {
            ++failed;
            fmt::print(stderr, "{:.4f} GHz: {}\n", ghz_of(p.omega), p.error);
        }
        t.rows.push_back({ghz_of(p.omega), fd, bd});
        f.x.push_back(ghz_of(p.omega));
        f.y.push_back(fd);
        b.x.push_back(ghz_of(p.omega));
        b.y.push_back(bd);
    }
    cli::emit_csv(t, dir / "transient_sweep.csv");
    if (g.svg) {
        std::vector<Trace> tr{f};
        if (!forward_only) tr.push_back(b);
        cli::emit_svg({{"time-domain transmission", "frequency (GHz)", "dB", tr}}, dir / "transient_sweep.svg");
    }
    finish(dir, "transient-sweep", da.path, params);
    if (failed == pts.size()) {
        fmt::print(stderr, "every sweep point failed\n");
        return kExitNumerical;
    }
    return 0;
}

int run_transient_spectrum(const DeviceArgs& da, const Pumps& pumps, double fs_ghz, double signal_ua, int spp,
                           bool backward, double fmax, const Global& g,
                           const std::map<std::string, std::string>& params) {
    const auto dev = da.load();
    const auto prof = device::build_cell_array(dev);
    const auto drive = transient_drive(dev, pumps, signal_ua, spp);
    const auto net = transient::build_network(dev, prof);
    const auto cfg = transient::make_config(dev, prof, drive, w_of(fs_ghz),
                                            backward ? transient::Response::backward : transient::Response::forward);
    const auto res = transient::integrate_transient(net, cfg);
    const auto spec = transient::output_spectrum(res, fmax * 1e9);
    const auto dir = prepare_out(g);
    Table t{{"freq_GHz", "power_dbm"}, {}};
    for (std::size_t k = 0; k < spec.frequency.size(); ++k) t.rows.push_back({spec.frequency[k] * 1e-9, spec.power_dbm[k]});
    cli::emit_csv(t, dir / "transient_spectrum.csv");
    std::vector<std::pair<std::string, double>> tones{{"s", fs_ghz * 1e9}};
    if (!pumps.fc_off) {
        tones.emplace_back("c", pumps.fc * 1e9);
        tones.emplace_back("c2", 2.0 * pumps.fc * 1e9);
    }
    if (!pumps.pa_off) {
        tones.emplace_back("i", (pumps.fa - fs_ghz) * 1e9);
        tones.emplace_back("a", pumps.fa * 1e9);
    }
    if (!pumps.pa_off && !pumps.fc_off) tones.emplace_back("a-2c", (pumps.fa - 2.0 * pumps.fc) * 1e9);
    for (const auto& p : transient::annotate_peaks(spec, tones))
        fmt::print("{:>5} {:9.4f} GHz {:8.2f} dBm\n", p.label, p.frequency * 1e-9, p.power_dbm);
    if (g.svg) {
        Trace tr{"output", {}, {}, ""};
        for (const auto& r : t.rows) {
            tr.x.push_back(r[0]);
            tr.y.push_back(std::max(r[1], -250.0));
        }
        cli::emit_svg({{"output power spectrum", "frequency (GHz)", "dBm", {tr}}}, dir / "transient_spectrum.svg");
    }
    finish(dir, "transient-spectrum", da.path, params);
    return 0;
}

phasematch::Process parse_process(const std::string& s) {
    if (s == "pa") return phasematch::Process::pa;
    if (s == "fc-down") return phasematch::Process::fc_down;
    if (s == "fc-up") return phasematch::Process::fc_up;
    throw ConfigError("--process must be pa, fc-down or fc-up");
}

int run_phase_match(const DeviceArgs& da, const std::string& process, double target, double pump_dbm,
                    double scan_lo, double scan_hi, double hint, const Sweep& sw, bool no_refl, const Global& g,
                    const std::map<std::string, std::string>& params) {
    const auto dev = da.load();
    const auto prof = device::build_cell_array(dev);
    const auto proc = parse_process(process);
    const auto table = cme::cme_dispersion(dev, prof, 22e9);
    const phasematch::Context ctx{dev, table, !no_refl};
    phasematch::PlacementOptions o;
    if (scan_lo > 0.0) o.scan_min = w_of(scan_lo);
    if (scan_hi > 0.0) o.scan_max = w_of(scan_hi);
    if (hint > 0.0) o.hint = w_of(hint);
    const double amp = pump_dbm <= -300.0 ? 0.0 : cme::power_to_current(pump_dbm, dev.environment_impedance);
    const auto p = phasematch::solve_pump_placement(ctx, proc, w_of(target), amp, o);
    fmt::print("pump {:.4f} GHz  signal {:.4f} GHz  partner {:.4f} GHz  residual {:.3g} rad/cell\n",
               ghz_of(p.pump_omega), ghz_of(p.signal_omega), ghz_of(p.partner_omega), p.residual);
    if (p.roots.size() > 1) {
        std::string r;
        for (double w : p.roots) r += fmt::format(" {:.4f}", ghz_of(w));
        fmt::print("all roots (GHz):{}\n", r);
    }
    const auto dir = prepare_out(g);
    cli::emit_csv({{"pump_GHz", "signal_GHz", "partner_GHz", "residual_rad_per_cell"},
                   {{ghz_of(p.pump_omega), ghz_of(p.signal_omega), ghz_of(p.partner_omega), p.residual}}},
                  dir / "phase_match.csv");
    const auto curve = phasematch::mismatch_curve(ctx, proc, p.pump_omega, amp, sw.omegas());
    Table c{{"freq_GHz", "delta_beta_rad_per_cell"}, {}};
    for (std::size_t k = 0; k < curve.signal_omega.size(); ++k)
        c.rows.push_back({ghz_of(curve.signal_omega[k]), curve.delta_beta[k]});
    cli::emit_csv(c, dir / "mismatch_curve.csv");
    if (g.svg) {
        Trace tr{"mismatch", {}, {}, ""};
        for (const auto& r : c.rows) {
            tr.x.push_back(r[0]);
            tr.y.push_back(r[1]);
        }
        cli::emit_svg({{"phase mismatch at the matched pump", "signal frequency (GHz)", "rad/cell", {tr}}},
                      dir / "mismatch_curve.svg");
    }
    finish(dir, "phase-match", da.path, params);
    return 0;
}

std::vector<noisecal::NoiseSample> read_noise_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open noise data '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("noise data '" + path + "' is empty");
    std::vector<std::string> cols;
    {
        std::stringstream ss(line);
        std::string c;
        while (std::getline(ss, c, ',')) cols.push_back(c);
    }
    auto col = [&](const std::string& name) {
        for (std::size_t k = 0; k < cols.size(); ++k)
            if (cols[k] == name) return k;
        throw ConfigError("noise data lacks column '" + name + "'");
    };
    const auto cf = col("freq_GHz"), cg = col("gain_db"), cn = col("nsys_quanta");
    std::vector<noisecal::NoiseSample> out;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<double> v;
        std::stringstream ss(line);
        std::string c;
        while (std::getline(ss, c, ',')) {
            try {
                v.push_back(std::stod(c));
            } catch (const std::exception&) {
                throw ConfigError(fmt::format("noise data line {}: '{}' is not a number", lineno, c));
            }
        }
        if (v.size() != cols.size()) throw ConfigError(fmt::format("noise data line {}: wrong column count", lineno));
        out.push_back({v[cf] * 1e9, std::pow(10.0, v[cg] / 10.0), v[cn], 1.0});
    }
    if (out.empty()) throw ConfigError("noise data '" + path + "' has no samples");
    return out;
}

struct SynthArgs {
    bool on = false;
    double n1 = 1.7, n2 = 17.5, sigma = 0.05, gmin = 1.0, gmax = 50.0, freq = 7.0;
    int points = 20;
    unsigned long long seed = 1;
};

int run_noise_fit(const std::string& input, double bin_ghz, const SynthArgs& sy, const Global& g,
                  const std::map<std::string, std::string>& params) {
    std::vector<noisecal::NoiseSample> s;
    const auto dir = prepare_out(g);
    if (sy.on) {
        s = noisecal::synthetic_samples(sy.n1, sy.n2, sy.sigma, sy.points, sy.gmin, sy.gmax, sy.seed);
        for (auto& p : s) p.frequency = sy.freq * 1e9;
        Table in{{"freq_GHz", "gain_db", "nsys_quanta"}, {}};
        for (const auto& p : s) in.rows.push_back({p.frequency * 1e-9, db10(p.gain), p.nsys});
        cli::emit_csv(in, dir / "noise_input.csv");
    } else {
        if (input.empty()) throw ConfigError("noise-fit needs --input or --synthetic");
        s = read_noise_csv(input);
    }
    const auto bins = noisecal::fit_binned(s, bin_ghz * 1e9);
    Table t{{"f_lo_GHz", "f_hi_GHz", "n1_quanta", "n2_quanta", "residual_norm", "samples", "ok", "negative_flag"}, {}};
    for (const auto& b : bins) {
        t.rows.push_back({b.f_lo * 1e-9, b.f_hi * 1e-9, b.ok ? b.fit.n1 : kNaN, b.ok ? b.fit.n2 : kNaN,
                          b.ok ? b.fit.residual_norm : kNaN, static_cast<double>(b.fit.sample_count),
                          b.ok ? 1.0 : 0.0, b.fit.negative_parameter ? 1.0 : 0.0});
        if (b.ok)
            fmt::print("{:.3f}-{:.3f} GHz: N1 = {:.4f}, N2 = {:.4f} quanta ({} samples){}\n", b.f_lo * 1e-9,
                       b.f_hi * 1e-9, b.fit.n1, b.fit.n2, b.fit.sample_count,
                       b.fit.negative_parameter ? "  [negative parameter]" : "");
        else
            fmt::print(stderr, "{:.3f}-{:.3f} GHz: fit failed ({} samples)\n", b.f_lo * 1e-9, b.f_hi * 1e-9,
                       b.fit.sample_count);
    }
    cli::emit_csv(t, dir / "noise_fit.csv");
    Table ov{{"freq_GHz", "gain_db", "nsys_quanta", "model_quanta"}, {}};
    Trace meas{"measured", {}, {}, ""}, model{"N1 + N2/G", {}, {}, ""};
    for (const auto& p : s) {
        double m = kNaN;
        for (const auto& b : bins)
            if (b.ok && p.frequency >= b.f_lo && p.frequency < b.f_hi) m = noisecal::predict_nsys(b.fit, p.gain);
        ov.rows.push_back({p.frequency * 1e-9, db10(p.gain), p.nsys, m});
        meas.x.push_back(db10(p.gain));
        meas.y.push_back(p.nsys);
        model.x.push_back(db10(p.gain));
        model.y.push_back(m);
    }
    cli::emit_csv(ov, dir / "noise_overlay.csv");
    if (g.svg) cli::emit_svg({{"system-added noise", "gain (dB)", "quanta", {meas, model}}}, dir / "noise_fit.svg");
    finish(dir, "noise-fit", input, params, sy.on ? sy.seed : 0);
    bool any = false;
    for (const auto& b : bins) any = any || b.ok;
    return any ? 0 : kExitNumerical;
}

int run(int argc, char** argv);

/// Rebuilds the command line recorded in a manifest.
int rerun(const std::string& manifest_path, const std::string& out_dir) {
    const auto m = cli::read_manifest(manifest_path);
    if (m.subcommand.empty()) throw ConfigError("manifest has no subcommand");
    std::vector<std::string> args{"twpac", m.subcommand};
    if (m.subcommand != "noise-fit") {
        args.push_back("--device");
        args.push_back(m.device_config);
    }
    for (const auto& [k, v] : m.parameters) {
        if (k == "--out-dir") continue;
        args.push_back(k);
        if (v == "true") continue;
        std::stringstream ss(v);
        std::string part;
        while (ss >> part) args.push_back(part);
    }
    args.push_back("--out-dir");
    args.push_back(out_dir.empty() ? m.output_directory : out_dir);
    std::vector<char*> cargs;
    for (auto& s : args) cargs.push_back(s.data());
    return run(static_cast<int>(cargs.size()), cargs.data());
}

int run(int argc, char** argv) {
    CLI::App app{"Josephson traveling-wave parametric amplifier-circulator toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", cli::version());
    Global g;
    auto add_global = [&](CLI::App* s) {
        s->add_option("--workers", g.workers, "parallel sweep workers")->capture_default_str();
        s->add_option("--out-dir", g.out_dir, "output directory (default: $TWPAC_OUTPUT_DIR or .)");
        s->add_flag("--svg", g.svg, "also write SVG plots");
    };

    auto* disp = app.add_subcommand("dispersion", "linear transmission, Bloch wavenumber and impedance");
    DeviceArgs disp_dev;
    disp_dev.attach(disp);
    double d_fmin = 0.02, d_fmax = 16.0, d_step = 10.0, d_thr = -10.0;
    disp->add_option("--fmin", d_fmin, "GHz")->capture_default_str();
    disp->add_option("--fmax", d_fmax, "GHz")->capture_default_str();
    disp->add_option("--step-mhz", d_step, "MHz")->capture_default_str();
    disp->add_option("--threshold-db", d_thr, "stopband threshold on |S21|")->capture_default_str();
    add_global(disp);

    auto* cmes = app.add_subcommand("cme-sweep", "coupled-mode gain versus signal frequency");
    DeviceArgs cme_dev;
    cme_dev.attach(cmes);
    Pumps cme_p;
    cme_p.attach(cmes);
    Sweep cme_sw;
    cme_sw.attach(cmes, 3.0, 12.0, 0.02);
    std::string cme_dir = "both";
    bool no4wm = false, no_refl = false, cgamma = false;
    double sig_dbm = -133.0;
    cmes->add_option("--direction", cme_dir, "forward, backward or both")
        ->check(CLI::IsMember({"forward", "backward", "both"}))
        ->capture_default_str();
    cmes->add_flag("--no-4wm", no4wm, "3WM terms only");
    cmes->add_flag("--no-reflections", no_refl, "matched ports (Gamma = 0)");
    cmes->add_flag("--complex-gamma", cgamma, "keep the phase of the port reflection");
    cmes->add_option("--signal-dbm", sig_dbm, "signal power at the chip input")->capture_default_str();
    add_global(cmes);

    auto* trs = app.add_subcommand("transient-sweep", "time-domain S21 versus signal frequency");
    DeviceArgs tr_dev;
    tr_dev.attach(trs);
    Pumps tr_p;
    tr_p.attach(trs);
    Sweep tr_sw;
    tr_sw.attach(trs, 0.02, 12.0, 0.02);
    double tr_sig = 0.05;
    int spp = 128;
    bool fwd_only = false;
    trs->add_option("--signal-ua", tr_sig, "signal source amplitude, uA")->capture_default_str();
    trs->add_option("--samples-per-period", spp, "time steps per period of the highest tone")->capture_default_str();
    trs->add_flag("--forward-only", fwd_only, "skip the backward runs");
    add_global(trs);

    auto* trp = app.add_subcommand("transient-spectrum", "time-domain output power spectrum");
    DeviceArgs sp_dev;
    sp_dev.attach(trp);
    Pumps sp_p;
    sp_p.attach(trp);
    double sp_fs = 7.0, sp_sig = 0.05, sp_fmax = 30.0;
    int sp_spp = 128;
    bool sp_bwd = false;
    trp->add_option("--signal-ghz", sp_fs, "signal frequency")->capture_default_str();
    trp->add_option("--signal-ua", sp_sig, "signal source amplitude, uA")->capture_default_str();
    trp->add_option("--samples-per-period", sp_spp)->capture_default_str();
    trp->add_option("--spectrum-fmax", sp_fmax, "highest reported frequency, GHz")->capture_default_str();
    trp->add_flag("--backward", sp_bwd, "swap the pump ports");
    add_global(trp);

    auto* pm = app.add_subcommand("phase-match", "pump frequency that phase matches a process");
    DeviceArgs pm_dev;
    pm_dev.attach(pm);
    std::string proc = "pa";
    double target = 1.0, pump_dbm = -400.0, scan_lo = 0.0, scan_hi = 0.0, hint = 0.0;
    bool pm_norefl = false;
    Sweep pm_sw;
    pm_sw.attach(pm, 1.0, 12.0, 0.02);
    pm->add_option("--process", proc, "pa, fc-down or fc-up")
        ->check(CLI::IsMember({"pa", "fc-down", "fc-up"}))
        ->capture_default_str();
    pm->add_option("--target-ghz", target, "pa: signal-idler detuning; fc: signal frequency")->capture_default_str();
    pm->add_option("--pump-dbm", pump_dbm, "pump power for the Kerr correction (default: linear)");
    pm->add_option("--scan-min-ghz", scan_lo, "lowest pump frequency scanned");
    pm->add_option("--scan-max-ghz", scan_hi, "highest pump frequency scanned");
    pm->add_option("--hint-ghz", hint, "preferred root when several exist");
    pm->add_flag("--no-reflections", pm_norefl, "drop the (1 + Gamma^2) factor");
    add_global(pm);

    auto* nf = app.add_subcommand("noise-fit", "two-stage noise model fit N_sys = N1 + N2/G");
    std::string nf_in;
    double bin = 0.1;
    SynthArgs sy;
    nf->add_option("--input", nf_in, "CSV with freq_GHz, gain_db, nsys_quanta");
    nf->add_option("--bin-ghz", bin, "frequency bin width")->capture_default_str();
    nf->add_flag("--synthetic", sy.on, "fit seeded synthetic data instead of a file");
    nf->add_option("--n1", sy.n1)->capture_default_str();
    nf->add_option("--n2", sy.n2)->capture_default_str();
    nf->add_option("--sigma", sy.sigma)->capture_default_str();
    nf->add_option("--points", sy.points)->capture_default_str();
    nf->add_option("--gain-min", sy.gmin)->capture_default_str();
    nf->add_option("--gain-max", sy.gmax)->capture_default_str();
    nf->add_option("--freq-ghz", sy.freq)->capture_default_str();
    nf->add_option("--seed", sy.seed)->capture_default_str();
    add_global(nf);

    auto* rr = app.add_subcommand("rerun", "repeat the run recorded in a manifest");
    std::string manifest;
    std::string rr_out;
    rr->add_option("manifest", manifest, "manifest.json")->required();
    rr->add_option("--out-dir", rr_out, "output directory (default: the recorded one)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }
    if (g.workers < 1) throw ConfigError("--workers must be >= 1");

    if (*disp) return run_dispersion(disp_dev, d_fmin, d_fmax, d_step, d_thr, g, given_options(disp));
    if (*cmes)
        return run_cme(cme_dev, cme_p, cme_sw, cme_dir, no4wm, no_refl, cgamma, sig_dbm, g, given_options(cmes));
    if (*trs) return run_transient_sweep(tr_dev, tr_p, tr_sw, tr_sig, spp, fwd_only, g, given_options(trs));
    if (*trp) return run_transient_spectrum(sp_dev, sp_p, sp_fs, sp_sig, sp_spp, sp_bwd, sp_fmax, g, given_options(trp));
    if (*pm)
        return run_phase_match(pm_dev, proc, target, pump_dbm, scan_lo, scan_hi, hint, pm_sw, pm_norefl, g,
                               given_options(pm));
    if (*nf) return run_noise_fit(nf_in, bin, sy, g, given_options(nf));
    if (*rr) return rerun(manifest, rr_out);
    return kExitConfig;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const ConfigError& e) {
        fmt::print(stderr, "config error: {}\n", e.what());
        return kExitConfig;
    } catch (const NumericalError& e) {
        fmt::print(stderr, "numerical error: {}\n", e.what());
        return kExitNumerical;
    } catch (const DomainError& e) {
        fmt::print(stderr, "numerical error: {}\n", e.what());
        return kExitNumerical;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 1;
    }
}
