#include "twpac/dispersion.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "twpac/constants.hpp"
#include "twpac/errors.hpp"

namespace twpac::dispersion {

using constants::two_pi;
const cplx I{0.0, 1.0};

TwoPortMatrix TwoPortMatrix::inverse() const {
    const cplx det = determinant();
    return {D / det, -B / det, -C / det, A / det};
}

TwoPortMatrix operator*(const TwoPortMatrix& l, const TwoPortMatrix& r) {
    return {l.A * r.A + l.B * r.C, l.A * r.B + l.B * r.D, l.C * r.A + l.D * r.C,
            l.C * r.B + l.D * r.D};
}

cplx lossy_capacitance(double capacitance, double loss_tangent) {
    return capacitance * cplx(1.0, -loss_tangent);
}

cplx shunt_admittance(const UnitCell& cell, double omega, double loss_tangent) {
    const cplx cc = lossy_capacitance(cell.ground_capacitance, loss_tangent);
    if (!cell.has_rpm) return I * omega * cc;
    const cplx cr = lossy_capacitance(cell.rpm.capacitance, loss_tangent);
    const double lr = cell.rpm.inductance;
    const double w2 = omega * omega;
    // Cc in series with (Lr || Cr): Y = i w Cc (1 - w^2 Lr Cr) / (1 - w^2 Lr (Cr + Cc)).
    const cplx den = 1.0 - w2 * lr * (cr + cc);
    if (std::abs(den) < 1e-14) throw NumericalError("shunt branch pole");
    return I * omega * cc * (1.0 - w2 * lr * cr) / den;
}

TwoPortMatrix unit_cell_matrix(const UnitCell& cell, double omega, const device::BiasPoint& bias,
                               double loss_tangent) {
    const double ld = device::static_inductance(cell.junction, bias);
    const double a = omega * omega * ld * cell.junction.junction_capacitance;
    if (!(a < 1.0)) throw DomainError("frequency at or above the junction plasma resonance");
    const cplx zs = I * omega * ld / (1.0 - a);
    const cplx y = shunt_admittance(cell, omega, loss_tangent);
    const cplx h = 0.5 * zs;
    // [1 h; 0 1][1 0; y 1][1 h; 0 1]
    return {1.0 + h * y, h * (2.0 + h * y), y, 1.0 + h * y};
}

TwoPortMatrix cascade(std::span<const TwoPortMatrix> matrices) {
    TwoPortMatrix m = TwoPortMatrix::identity();
    for (const auto& x : matrices) m = m * x;
    return m;
}

TwoPortMatrix matrix_power(TwoPortMatrix m, int n) {
    TwoPortMatrix r = TwoPortMatrix::identity();
    while (n > 0) {
        if (n & 1) r = r * m;
        m = m * m;
        n >>= 1;
    }
    return r;
}

cplx s21_from_matrix(const TwoPortMatrix& m, double z0) {
    return 2.0 / (m.A + m.B / z0 + m.C * z0 + m.D);
}

cplx s11_from_matrix(const TwoPortMatrix& m, double z0) {
    return (m.A + m.B / z0 - m.C * z0 - m.D) / (m.A + m.B / z0 + m.C * z0 + m.D);
}

cplx bloch_exponent(const TwoPortMatrix& m) {
    cplx g = std::acosh(0.5 * (m.A + m.D));
    if (g.real() < 0.0) g = -g;
    return g;
}

double wavenumber(const TwoPortMatrix& m, int cells) {
    return std::abs(std::acosh(0.5 * (m.A + m.D)).imag()) / cells;
}

cplx characteristic_impedance(const TwoPortMatrix& m) {
    if (m.C == cplx(0.0)) throw NumericalError("singular impedance: C element vanishes");
    cplx z = std::sqrt(m.B / m.C);
    if (z.real() < 0.0) z = -z;
    return z;
}

double attenuation_constant(double shunt_conductance, double impedance) {
    return 0.5 * shunt_conductance * impedance;
}

UnitCell cell_at(const device::DeviceSpec& device, const device::CellProfile& profile, int x) {
    UnitCell c;
    c.junction = device.junction;
    c.ground_capacitance = profile.ground_capacitance.at(static_cast<std::size_t>(x));
    c.has_rpm = profile.rpm.at(static_cast<std::size_t>(x)) != 0;
    c.rpm = device.rpm;
    return c;
}

TwoPortMatrix supercell_matrix(const device::DeviceSpec& device, const device::CellProfile& profile,
                               double omega, double loss_tangent) {
    const int n0 = device.loading.supercell_length;
    if (static_cast<int>(profile.size()) < n0) throw NumericalError("profile shorter than one supercell");
    TwoPortMatrix m;
    for (int x = 0; x < n0; ++x) {
        try {
            m = m * unit_cell_matrix(cell_at(device, profile, x), omega, device.bias, loss_tangent);
        } catch (const NumericalError& e) {
            throw NumericalError(std::string(e.what()) + " at cell " + std::to_string(x) +
                                 ", f = " + std::to_string(omega / two_pi / 1e9) + " GHz");
        }
    }
    return m;
}

TwoPortMatrix line_matrix(const device::DeviceSpec& device, const device::CellProfile& profile,
                          double omega, double loss_tangent) {
    return matrix_power(supercell_matrix(device, profile, omega, loss_tangent), device.supercell_count);
}

cplx supercell_exponent(const device::DeviceSpec& device, const device::CellProfile& profile,
                        double omega, double loss_tangent) {
    cplx g = bloch_exponent(supercell_matrix(device, profile, omega, loss_tangent));
    if (loss_tangent > 0.0) return g;
    // On a lossless passband Re g = 0 and both signs are admissible. Take the one that a
    // vanishingly small dielectric loss would select.
    const cplx ref = bloch_exponent(supercell_matrix(device, profile, omega, 1e-9));
    if (g.imag() * ref.imag() < 0.0) g = -g;
    if (g.real() < 0.0) g = cplx(-g.real(), g.imag());
    return g;
}

std::vector<double> unwrap(std::span<const double> phases) {
    std::vector<double> out(phases.begin(), phases.end());
    for (std::size_t i = 1; i < out.size(); ++i) {
        double d = phases[i] - phases[i - 1];
        d -= two_pi * std::round(d / two_pi);
        out[i] = out[i - 1] + d;
    }
    return out;
}

std::vector<Stopband> find_stopbands(const DispersionTable& table, double threshold_db,
                                     double merge_gap_omega) {
    std::vector<Stopband> raw;
    bool inside = false;
    Stopband cur;
    for (const auto& p : table.points) {
        const double db = 20.0 * std::log10(std::abs(p.s21));
        if (db < threshold_db) {
            if (!inside) {
                cur.omega_lo = p.omega;
                inside = true;
            }
            cur.omega_hi = p.omega;
        } else if (inside) {
            raw.push_back(cur);
            inside = false;
        }
    }
    if (inside) raw.push_back(cur);
    std::vector<Stopband> merged;
    for (const auto& s : raw) {
        if (!merged.empty() && s.omega_lo - merged.back().omega_hi <= merge_gap_omega) {
            merged.back().omega_hi = s.omega_hi;
        } else {
            merged.push_back(s);
        }
    }
    return merged;
}

std::vector<double> frequency_grid(double f_min, double f_max, double f_step) {
    if (!(f_step > 0.0) || !(f_max >= f_min)) throw DomainError("invalid frequency grid");
    std::vector<double> f;
    const auto n = static_cast<long>(std::floor((f_max - f_min) / f_step + 1e-9));
    f.reserve(static_cast<std::size_t>(n + 1));
    for (long i = 0; i <= n; ++i) f.push_back(f_min + static_cast<double>(i) * f_step);
    return f;
}

namespace {

constexpr double kTrackingLoss = 1e-4;

/// Unwrapped phase at w1 given the unwrapped phase at w0. Bisects while the step exceeds pi/4
/// or the half trace is large, since the phase winds quickly next to a shunt pole.
double track_phase(const std::function<cplx(double)>& exponent, double w0, double phi0, cplx g0,
                   double w1, cplx g1, int depth) {
    double d = g1.imag() - phi0;
    d -= two_pi * std::round(d / two_pi);
    const bool near_pole = std::max(std::abs(std::cosh(g0)), std::abs(std::cosh(g1))) > 4.0;
    if (depth == 0 || (std::abs(d) <= 0.25 * std::numbers::pi && !near_pole)) {
        if (std::abs(d) > 0.5 * std::numbers::pi && !near_pole) {
            throw NumericalError("frequency grid too coarse to unwrap the wavenumber near " +
                                 std::to_string(w1 / two_pi / 1e9) + " GHz");
        }
        return phi0 + d;
    }
    const double wm = 0.5 * (w0 + w1);
    const cplx gm = exponent(wm);
    const double phim = track_phase(exponent, w0, phi0, g0, wm, gm, depth - 1);
    return track_phase(exponent, wm, phim, gm, w1, g1, depth - 1);
}

}  // namespace

cplx DispersionTable::complex_wavenumber(double omega) const {
    if (points.empty() || omega < points.front().omega || omega > points.back().omega) {
        throw DomainError("frequency " + std::to_string(omega / two_pi / 1e9) +
                          " GHz outside the dispersion table");
    }
    auto it = std::lower_bound(points.begin(), points.end(), omega,
                               [](const DispersionPoint& p, double w) { return p.omega < w; });
    if (it == points.begin()) return {it->k, it->attenuation};
    const auto& b = *it;
    const auto& a = *(it - 1);
    const double t = (omega - a.omega) / (b.omega - a.omega);
    return {a.k + t * (b.k - a.k), a.attenuation + t * (b.attenuation - a.attenuation)};
}

cplx DispersionTable::impedance(double omega) const {
    if (points.empty() || omega < points.front().omega || omega > points.back().omega) {
        throw DomainError("frequency outside the dispersion table");
    }
    auto it = std::lower_bound(points.begin(), points.end(), omega,
                               [](const DispersionPoint& p, double w) { return p.omega < w; });
    if (it == points.begin()) return it->impedance;
    const auto& b = *it;
    const auto& a = *(it - 1);
    const double t = (omega - a.omega) / (b.omega - a.omega);
    return a.impedance + t * (b.impedance - a.impedance);
}

double DispersionTable::s21_db(double omega) const {
    auto it = std::lower_bound(points.begin(), points.end(), omega,
                               [](const DispersionPoint& p, double w) { return p.omega < w; });
    if (it == points.end()) throw DomainError("frequency outside the dispersion table");
    return 20.0 * std::log10(std::abs(it->s21));
}

DispersionTable compute_table(const device::DeviceSpec& device, const device::CellProfile& profile,
                              const DispersionOptions& options) {
    const int n0 = device.loading.supercell_length;
    const double tand = device.loss_tangent;
    const double z0 = device.environment_impedance;
    const auto freqs = frequency_grid(options.f_min, options.f_max, options.f_step);

    DispersionTable t;
    t.cells = device.total_cells();
    t.phase_velocity = device::phase_velocity(device, profile);
    t.points.resize(freqs.size());

    // The branch is tracked on a line with at least a small dielectric loss, where the phase is
    // continuous through the gaps. The actual exponent is then pinned to the nearest branch.
    const double track_loss = std::max(tand, kTrackingLoss);
    auto tracked = [&](double w) { return supercell_exponent(device, profile, w, track_loss); };

    double prev_w = 0.0;
    double prev_phi = 0.0;
    cplx prev_gt;
    for (std::size_t i = 0; i < freqs.size(); ++i) {
        const double w = two_pi * freqs[i];
        const TwoPortMatrix msc = supercell_matrix(device, profile, w, tand);
        const cplx g = tand > 0.0 ? bloch_exponent(msc) : supercell_exponent(device, profile, w, 0.0);
        const cplx gt = tand == track_loss ? g : tracked(w);
        const TwoPortMatrix mt = matrix_power(msc, device.supercell_count);

        double phit = gt.imag();
        if (i > 0) phit = track_phase(tracked, prev_w, prev_phi, prev_gt, w, gt, options.max_refine);
        prev_w = w;
        prev_phi = phit;
        prev_gt = gt;
        double dphi = g.imag() - phit;
        dphi -= two_pi * std::round(dphi / two_pi);
        const double phi = phit + dphi;

        auto& p = t.points[i];
        p.omega = w;
        p.k = phi / n0;
        p.k_star = p.k - w / t.phase_velocity;
        p.attenuation = g.real() / n0;
        p.s21 = s21_from_matrix(mt, z0);
        p.impedance = characteristic_impedance(msc);
    }
    t.stopbands = find_stopbands(t, options.threshold_db, two_pi * options.merge_gap);
    return t;
}

}  // namespace twpac::dispersion
