#include "elmlink/photonic_node.hpp"

#include "elmlink/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

namespace elmlink {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kElectronCharge = 1.602176634e-19;
constexpr double kPlanck = 6.62607015e-34;
constexpr double kSpeedOfLight = 299792458.0;

double photon_energy(const LaserParams& lp) {
    return kPlanck * kSpeedOfLight / (lp.emission_wavelength_nm * 1e-9);
}

// Emitted power (W) per intracavity photon.
double power_per_photon(const LaserParams& lp) {
    return photon_energy(lp) / (lp.photon_lifetime_ps * 1e-12);
}

std::vector<bool> data_slots(const DriveWaveform& drive) {
    std::vector<bool> mask(drive.values.size(), false);
    for (std::size_t b : drive.symbol_boundaries)
        for (std::size_t j = 0; j < drive.nodes_per_symbol; ++j) mask[b + j] = true;
    return mask;
}

struct Derivative {
    cplx field;
    double carriers;
};

}  // namespace

EncodingMethod parse_encoding_method(const std::string& name) {
    if (name == "A" || name == "a") return EncodingMethod::A;
    if (name == "B" || name == "b") return EncodingMethod::B;
    if (name == "C" || name == "c") return EncodingMethod::C;
    if (name == "D" || name == "d") return EncodingMethod::D;
    throw ParameterError("unknown encoding method '" + name + "' (expected A, B, C or D)");
}

const char* to_string(EncodingMethod method) {
    switch (method) {
        case EncodingMethod::A: return "A";
        case EncodingMethod::B: return "B";
        case EncodingMethod::C: return "C";
        case EncodingMethod::D: return "D";
    }
    return "?";
}

void LaserParams::validate() const {
    if (!(photon_lifetime_ps > 0.0 && carrier_lifetime_ns > 0.0))
        throw ParameterError("LaserParams: lifetimes must be positive");
    if (!(threshold_current_ma > 0.0) || bias_current_ma < 0.0)
        throw ParameterError("LaserParams: invalid currents");
    if (!(differential_gain_per_s > 0.0)) throw ParameterError("LaserParams: differential gain must be positive");
    if (transparency_carriers() <= 0.0)
        throw ParameterError("LaserParams: threshold too low for the given gain and photon lifetime");
    if (injection_coupling_per_s < 0.0 || spontaneous_emission_factor < 0.0 || gain_saturation < 0.0)
        throw ParameterError("LaserParams: coupling, spontaneous factor and gain saturation must be >= 0");
}

double LaserParams::threshold_carriers() const {
    return threshold_current_ma * 1e-3 * carrier_lifetime_ns * 1e-9 / kElectronCharge;
}

double LaserParams::transparency_carriers() const {
    return threshold_carriers() - 1.0 / (differential_gain_per_s * photon_lifetime_ps * 1e-12);
}

long NodeConfig::slots_per_delay() const {
    const double ratio = tau_ns * 1e3 / theta_ps;
    return std::lround(ratio);
}

void NodeConfig::validate() const {
    if (!(theta_ps > 0.0 && tau_ns > 0.0)) throw ParameterError("NodeConfig: theta and tau must be positive");
    if (std::abs(tau_ns * 1e3 / theta_ps - static_cast<double>(slots_per_delay())) > 1e-6)
        throw ParameterError("NodeConfig: tau must be an integer number of theta slots");
    if (n_nodes < 2 || n_nodes % 2 != 0) throw ParameterError("NodeConfig: n_nodes must be even and >= 2");
    if (feedback_ratio < 0.0 || feedback_ratio > 1.0) throw ParameterError("NodeConfig: feedback_ratio must lie in [0, 1]");
    if (!(injection_power_uw >= 0.0)) throw ParameterError("NodeConfig: injection power must be >= 0");
    if (averages < 1) throw ParameterError("NodeConfig: averages must be >= 1");
    if (substeps < 16) throw ParameterError("NodeConfig: at least 16 integration substeps per theta");
    if (detection_noise < 0.0) throw ParameterError("NodeConfig: detection_noise must be >= 0");
    if (!(detection_reference_uw >= 0.0)) throw ParameterError("NodeConfig: detection_reference_uw must be >= 0");
    if ((method == EncodingMethod::A || method == EncodingMethod::B) && n_nodes > slots_per_delay())
        throw ParameterError("NodeConfig: masked symbol longer than the delay");
}

void DriveWaveform::validate() const {
    for (std::size_t k = 1; k < symbol_boundaries.size(); ++k)
        if (symbol_boundaries[k] <= symbol_boundaries[k - 1])
            throw ParameterError("DriveWaveform: symbol boundaries must increase");
    if (!symbol_boundaries.empty() && symbol_boundaries.back() + nodes_per_symbol > values.size())
        throw ParameterError("DriveWaveform: last symbol exceeds the waveform");
    for (double v : values)
        if (!std::isfinite(v)) throw ParameterError("DriveWaveform: non-finite value");
    if (!(reference_rms >= 0.0)) throw ParameterError("DriveWaveform: reference_rms must be >= 0");
}

double data_rms(const DriveWaveform& drive) {
    const auto is_data = data_slots(drive);
    double sq = 0.0;
    std::size_t count = 0;
    for (std::size_t s = 0; s < drive.values.size(); ++s)
        if (is_data[s]) {
            sq += drive.values[s] * drive.values[s];
            ++count;
        }
    return count ? std::sqrt(sq / static_cast<double>(count)) : 0.0;
}

Mask build_mask(int n, std::uint64_t seed) {
    if (n < 2 || n % 2 != 0) throw ParameterError("build_mask: mask length must be even and >= 2");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    Mask m;
    m.seed = seed;
    m.values.resize(static_cast<std::size_t>(n));
    for (auto& v : m.values) v = uni(rng);
    return m;
}

DriveWaveform mask_symbols(const SampledSignal& samples_2sps, const Mask& mask, double theta_ps) {
    if (samples_2sps.size() % 2 != 0) throw ParameterError("mask_symbols: input must hold 2 samples per symbol");
    if (mask.size() < 2 || mask.size() % 2 != 0) throw ParameterError("mask_symbols: mask length must be even");
    const std::size_t symbols = samples_2sps.size() / 2;
    const std::size_t n = mask.size();
    const std::size_t half = n / 2;
    DriveWaveform out;
    out.theta_ps = theta_ps;
    out.nodes_per_symbol = n;
    out.values.resize(symbols * n);
    out.symbol_boundaries.resize(symbols);
    for (std::size_t k = 0; k < symbols; ++k) {
        const double a = samples_2sps.samples[2 * k];
        const double b = samples_2sps.samples[2 * k + 1];
        for (std::size_t j = 0; j < half; ++j) {
            out.values[k * n + j] = a * mask.values[j];
            out.values[k * n + half + j] = b * mask.values[half + j];
        }
        out.symbol_boundaries[k] = k * n;
    }
    return out;
}

std::size_t symbols_per_delay(double tau_ns, std::size_t nodes, double theta_ps) {
    const auto slots = static_cast<std::size_t>(std::lround(tau_ns * 1e3 / theta_ps));
    return slots / nodes;
}

DriveWaveform schedule_drive(const DriveWaveform& masked, EncodingMethod method, double tau_ns) {
    masked.validate();
    const std::size_t n = masked.nodes_per_symbol;
    const std::size_t symbols = masked.symbol_boundaries.size();
    const auto slots = static_cast<std::size_t>(std::lround(tau_ns * 1e3 / masked.theta_ps));
    if (n == 0) throw ParameterError("schedule_drive: empty masked symbols");

    DriveWaveform out;
    out.theta_ps = masked.theta_ps;
    out.nodes_per_symbol = n;
    out.reference_rms = masked.reference_rms;
    out.symbol_boundaries.resize(symbols);
    const auto copy_symbol = [&](std::size_t k, std::size_t at) {
        const std::size_t src = masked.symbol_boundaries[k];
        std::copy_n(masked.values.begin() + static_cast<long>(src), n, out.values.begin() + static_cast<long>(at));
        out.symbol_boundaries[k] = at;
    };

    switch (method) {
        case EncodingMethod::A:
        case EncodingMethod::B: {
            if (n > slots) throw ParameterError("schedule_drive: masked symbol longer than the delay");
            out.padded = true;
            out.values.assign(symbols * slots, 0.0);
            for (std::size_t k = 0; k < symbols; ++k) copy_symbol(k, k * slots);
            break;
        }
        case EncodingMethod::C: {
            const std::size_t per = slots / n;
            if (per == 0) throw ParameterError("schedule_drive: masked symbol longer than the delay");
            const std::size_t periods = (symbols + per - 1) / per;
            out.values.assign(periods * slots, 0.0);
            for (std::size_t k = 0; k < symbols; ++k) copy_symbol(k, (k / per) * slots + (k % per) * n);
            out.values.resize(symbols == 0 ? 0 : out.symbol_boundaries.back() + n);
            break;
        }
        case EncodingMethod::D: {
            out.values.assign(symbols * n, 0.0);
            for (std::size_t k = 0; k < symbols; ++k) copy_symbol(k, k * n);
            break;
        }
    }
    return out;
}

SampledSignal simulate_laser(const DriveWaveform& drive, const LaserParams& lp, const NodeConfig& nc,
                             const LaserRunOptions& options) {
    lp.validate();
    nc.validate();
    drive.validate();
    if (std::abs(drive.theta_ps - nc.theta_ps) > 1e-9) throw ParameterError("simulate_laser: drive theta differs from node theta");

    const int sub = nc.substeps;
    const double h = nc.theta_ps * 1e-12 / sub;
    const double inv_tp = 1.0 / (lp.photon_lifetime_ps * 1e-12);
    const double inv_tn = 1.0 / (lp.carrier_lifetime_ns * 1e-9);
    const double pump = lp.bias_current_ma * 1e-3 / kElectronCharge;
    const double gn = lp.differential_gain_per_s;
    const double n0 = lp.transparency_carriers();
    const double eps = lp.gain_saturation;
    const cplx alpha_factor(0.5, 0.5 * lp.linewidth_enhancement);
    const double detune = 2.0 * kPi * nc.delta_f_ghz * 1e9;
    const double kc = lp.injection_coupling_per_s;
    const double photon_w = power_per_photon(lp);
    const double quiescent_n = pump / inv_tn;

    // Injected field: a drive at the reference rms carries injection_power_uw.
    const double drive_rms = drive.reference_rms > 0.0 ? drive.reference_rms : data_rms(drive);
    const double inj_photons = nc.injection_power_uw * 1e-6 / photon_w;
    const double inj_amp = drive_rms > 0.0 ? kc * std::sqrt(inj_photons) / drive_rms : 0.0;
    const double rf_tau = 1.0 / (2.0 * kPi * nc.drive_bandwidth_ghz * 1e9);
    const double rf_half = std::exp(-0.5 * h / rf_tau);
    const double rf_full = std::exp(-h / rf_tau);

    const double feedback = nc.effective_feedback();
    const bool use_feedback = feedback > 0.0;
    const cplx fb_coeff = kc * std::sqrt(feedback) * std::polar(1.0, -nc.feedback_phase_rad);
    const std::size_t delay_steps = static_cast<std::size_t>(nc.slots_per_delay()) * static_cast<std::size_t>(sub);

    // Slot isolation: with the loop open and long idle gaps the node returns to
    // rest before the next symbol; restart each symbol from the rest state.
    const double idle_s = static_cast<double>(nc.slots_per_delay() - static_cast<long>(drive.nodes_per_symbol)) *
                          nc.theta_ps * 1e-12;
    const bool isolate = drive.padded && !use_feedback && idle_s >= 5.0 * lp.carrier_lifetime_ns * 1e-9;
    std::vector<bool> symbol_start(drive.values.size(), false);
    std::vector<bool> idle(drive.values.size(), isolate);
    for (std::size_t b : drive.symbol_boundaries) {
        symbol_start[b] = true;
        for (std::size_t j = b; j < std::min(b + drive.nodes_per_symbol, idle.size()); ++j) idle[j] = false;
    }

    const double spont = nc.spontaneous_noise ? lp.spontaneous_emission_factor * inv_tn * h / 2.0 : 0.0;
    std::mt19937_64 rng(nc.noise_seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    // Delay line: field at substep times, ring buffer of delay_steps + 1.
    std::vector<cplx> ring;
    if (use_feedback) {
        ring.assign(delay_steps + 1, cplx(0.0, 0.0));
        if (options.initial_history) {
            if (options.initial_history->size() != delay_steps)
                throw ParameterError("simulate_laser: initial history must span one delay");
        }
    }
    const auto delayed = [&](long step) -> cplx {
        // Field at time step*h - tau.
        const long j = step - static_cast<long>(delay_steps);
        if (j < 0) {
            if (options.initial_history) return (*options.initial_history)[static_cast<std::size_t>(j + static_cast<long>(delay_steps))];
            return cplx(0.0, 0.0);
        }
        return ring[static_cast<std::size_t>(j) % ring.size()];
    };

    const auto rhs = [&](cplx e, double n, double u, cplx ed) {
        const double s = std::norm(e);
        const double gain = gn * (n - n0) / (1.0 + eps * s);
        Derivative d;
        d.field = alpha_factor * (gain - inv_tp) * e - cplx(0.0, detune) * e + inj_amp * u;
        if (use_feedback) d.field += fb_coeff * ed;
        d.carriers = pump - n * inv_tn - gain * s;
        return d;
    };

    const double s_ref = lp.photon_lifetime_ps * 1e-12 * lp.threshold_current_ma * 1e-3 / kElectronCharge;
    const double s_limit = 1e6 * s_ref;

    cplx e(0.0, 0.0);
    double n = quiescent_n;
    double u = 0.0;
    if (use_feedback) ring[0] = e;

    SampledSignal out;
    out.sample_rate = 1.0 / h;
    out.samples.resize(drive.values.size() * static_cast<std::size_t>(sub));
    long step = 0;
    for (std::size_t slot = 0; slot < drive.values.size(); ++slot) {
        if (isolate && symbol_start[slot]) {
            e = cplx(0.0, 0.0);
            n = quiescent_n;
            u = 0.0;
        }
        if (idle[slot]) {
            // Nothing reads these samples and the next symbol restarts from rest.
            step += sub;
            continue;
        }
        const double x = drive.values[slot];
        for (int j = 0; j < sub; ++j, ++step) {
            const double u_mid = x + (u - x) * rf_half;
            const double u_end = x + (u - x) * rf_full;
            cplx ed0, edm, ed1;
            if (use_feedback) {
                ed0 = delayed(step);
                ed1 = delayed(step + 1);
                edm = 0.5 * (ed0 + ed1);
            }
            const Derivative k1 = rhs(e, n, u, ed0);
            const Derivative k2 = rhs(e + 0.5 * h * k1.field, n + 0.5 * h * k1.carriers, u_mid, edm);
            const Derivative k3 = rhs(e + 0.5 * h * k2.field, n + 0.5 * h * k2.carriers, u_mid, edm);
            const Derivative k4 = rhs(e + h * k3.field, n + h * k3.carriers, u_end, ed1);
            e += (h / 6.0) * (k1.field + 2.0 * k2.field + 2.0 * k3.field + k4.field);
            n += (h / 6.0) * (k1.carriers + 2.0 * k2.carriers + 2.0 * k3.carriers + k4.carriers);
            u = u_end;
            if (spont > 0.0) {
                const double amp = std::sqrt(spont * std::max(n, 0.0));
                const double re = gauss(rng);
                const double im = gauss(rng);
                e += amp * cplx(re, im);
            }
            const double s = std::norm(e);
            if (!std::isfinite(s) || !std::isfinite(n) || s > s_limit) {
                std::ostringstream msg;
                msg << "simulate_laser: numerical blow-up at t=" << step * h * 1e9 << " ns (delta_f="
                    << nc.delta_f_ghz << " GHz, feedback=" << feedback << ", injection=" << nc.injection_power_uw
                    << " uW, coupling=" << kc << " /s)";
                throw InstabilityError(msg.str());
            }
            if (use_feedback) ring[static_cast<std::size_t>(step + 1) % ring.size()] = e;
            out.samples[static_cast<std::size_t>(step)] = s * photon_w * 1e6;
        }
    }
    return out;
}

StateMatrix extract_states(const SampledSignal& intensity, const NodeConfig& nc, const DriveWaveform& schedule) {
    nc.validate();
    const auto sub = static_cast<std::size_t>(nc.substeps);
    if (intensity.size() != schedule.values.size() * sub)
        throw ParameterError("extract_states: intensity does not cover the schedule");

    // Photoreceiver: first-order low-pass on the fine grid.
    const double h = 1.0 / intensity.sample_rate;
    const double tau = 1.0 / (2.0 * kPi * nc.detection_bandwidth_ghz * 1e9);
    const double a = 1.0 - std::exp(-h / tau);
    // Open loop with long idle gaps: the receiver has forgotten the previous
    // symbol, so restart the filter like the laser (keeps symbols bit-isolated).
    const double idle_s = (static_cast<double>(nc.slots_per_delay()) - static_cast<double>(schedule.nodes_per_symbol)) *
                          nc.theta_ps * 1e-12;
    const bool isolate = schedule.padded && nc.effective_feedback() == 0.0 && idle_s >= 1000.0 * tau;
    std::vector<bool> restart(intensity.size(), false);
    if (isolate)
        for (std::size_t b : schedule.symbol_boundaries) restart[b * sub] = true;
    std::vector<double> filtered(intensity.size());
    double y = intensity.size() ? intensity.samples[0] : 0.0;
    for (std::size_t i = 0; i < intensity.size(); ++i) {
        if (restart[i]) y = intensity.samples[i];
        y += a * (intensity.samples[i] - y);
        filtered[i] = y;
    }

    const auto symbols = static_cast<Eigen::Index>(schedule.symbol_boundaries.size());
    const auto nodes = static_cast<Eigen::Index>(schedule.nodes_per_symbol);
    StateMatrix states;
    states.values.resize(symbols, nodes);
    for (Eigen::Index k = 0; k < symbols; ++k)
        for (Eigen::Index j = 0; j < nodes; ++j) {
            const std::size_t slot = schedule.symbol_boundaries[static_cast<std::size_t>(k)] + static_cast<std::size_t>(j);
            states.values(k, j) = filtered[(slot + 1) * sub - 1];
        }

    if (nc.detection_noise > 0.0 && states.values.size() > 0) {
        const double ref = nc.detection_reference_uw > 0.0 ? nc.detection_reference_uw : states.values.mean();
        const double sigma = nc.detection_noise * ref;
        std::mt19937_64 rng(nc.noise_seed ^ 0xde7ec7ull);
        std::normal_distribution<double> gauss(0.0, sigma);
        const double inv = 1.0 / nc.averages;
        for (Eigen::Index k = 0; k < symbols; ++k)
            for (Eigen::Index j = 0; j < nodes; ++j) {
                double acc = 0.0;
                for (int r = 0; r < nc.averages; ++r) acc += gauss(rng);
                states.values(k, j) = std::max(0.0, states.values(k, j) + acc * inv);
            }
    }
    return states;
}

SampledSignal normalize_unit_range(const SampledSignal& sig) {
    SampledSignal out = sig;
    if (sig.samples.empty()) return out;
    const auto [lo, hi] = std::minmax_element(sig.samples.begin(), sig.samples.end());
    const double span = *hi - *lo;
    for (auto& v : out.samples) v = span > 0.0 ? (v - *lo) / span : 0.0;
    return out;
}

StateMatrix run_node(const SampledSignal& input_2sps, const Mask& mask, const LaserParams& lp, const NodeConfig& nc) {
    if (static_cast<int>(mask.size()) != nc.n_nodes) throw ParameterError("run_node: mask length differs from n_nodes");
    const DriveWaveform masked = mask_symbols(input_2sps, mask, nc.theta_ps);
    const DriveWaveform schedule = schedule_drive(masked, nc.method, nc.tau_ns);
    const SampledSignal intensity = simulate_laser(schedule, lp, nc);
    return extract_states(intensity, nc, schedule);
}

}  // namespace elmlink
