#include <doctest.h>

#include "elmlink/errors.hpp"
#include "elmlink/photonic_node.hpp"

#include <cmath>
#include <random>

using namespace elmlink;

namespace {

SampledSignal random_2sps(std::size_t symbols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> x(2 * symbols);
    for (auto& v : x) v = u(rng);
    return SampledSignal(x, 112e9);
}

DriveWaveform idle_drive(std::size_t slots) {
    DriveWaveform d;
    d.values.assign(slots, 0.0);
    return d;
}

double tail_mean(const SampledSignal& s, std::size_t count) {
    double acc = 0.0;
    for (std::size_t k = s.size() - count; k < s.size(); ++k) acc += s.samples[k];
    return acc / static_cast<double>(count);
}

double sample_std(const Eigen::MatrixXd& m, double center) {
    return std::sqrt((m.array() - center).square().mean());
}

}  // namespace

TEST_CASE("masks") {
    const auto a = build_mask(20, 3);
    const auto b = build_mask(20, 3);
    CHECK(a.values == b.values);
    CHECK(a.size() == 20);
    for (double v : a.values) CHECK((v >= 0.0 && v <= 1.0));
    CHECK(build_mask(20, 4).values != a.values);
    CHECK_THROWS_AS(build_mask(21, 1), ParameterError);
    CHECK_THROWS_AS(build_mask(0, 1), ParameterError);
}

TEST_CASE("masking layout and linearity") {
    Mask m;
    m.values = {0.25, 0.75};
    const auto d = mask_symbols(SampledSignal({2.0, 4.0}, 1.0), m);
    CHECK(d.values == std::vector<double>{0.5, 3.0});

    const auto x = random_2sps(50, 1);
    const auto mask = build_mask(20, 7);
    const auto masked = mask_symbols(x, mask);
    CHECK(masked.values.size() == 50 * 20);
    CHECK(masked.nodes_per_symbol * masked.theta_ps * 1e-3 == doctest::Approx(1.25));
    for (std::size_t k = 0; k < 50; ++k) CHECK(masked.symbol_boundaries[k] == 20 * k);
    CHECK(masked.values[3 * 20 + 4] == x.samples[6] * mask.values[4]);
    CHECK(masked.values[3 * 20 + 14] == x.samples[7] * mask.values[14]);

    for (double alpha : {0.5, 4.0, -2.0}) {   // exact in binary floating point
        SampledSignal scaled = x;
        for (auto& v : scaled.samples) v *= alpha;
        const auto ms = mask_symbols(scaled, mask);
        for (std::size_t k = 0; k < ms.values.size(); ++k) CHECK(ms.values[k] == alpha * masked.values[k]);
    }
    SampledSignal scaled = x;
    for (auto& v : scaled.samples) v *= 0.375;
    const auto ms = mask_symbols(scaled, mask);
    for (std::size_t k = 0; k < ms.values.size(); ++k)
        CHECK(ms.values[k] == doctest::Approx(0.375 * masked.values[k]).epsilon(1e-15));

    CHECK_THROWS_AS(mask_symbols(SampledSignal({1.0, 2.0, 3.0}, 1.0), mask), ParameterError);
}

TEST_CASE("schedules per encoding method") {
    const auto mask = build_mask(20, 1);
    CHECK(symbols_per_delay(24.5, 20, 62.5) == 19);

    const auto one = mask_symbols(random_2sps(1, 2), mask);
    const auto a = schedule_drive(one, EncodingMethod::A, 24.5);
    CHECK(a.duration_ns() == doctest::Approx(24.5));
    CHECK(a.padded);

    const auto many = mask_symbols(random_2sps(40, 3), mask);
    const auto c = schedule_drive(many, EncodingMethod::C, 24.5);
    CHECK(c.symbol_boundaries[18] == 18 * 20);
    CHECK(c.symbol_boundaries[19] == 392);   // next delay period
    CHECK(c.symbol_boundaries[38] == 2 * 392);
    const auto dd = schedule_drive(many, EncodingMethod::D, 24.5);
    CHECK(dd.duration_ns() == doctest::Approx(40 * 1.25));
    CHECK(dd.values == many.values);

    const auto b = schedule_drive(many, EncodingMethod::B, 24.5);
    CHECK(b.duration_ns() == doctest::Approx(40 * 24.5));
    for (std::size_t k = 0; k < 40; ++k)
        for (std::size_t j = 0; j < 20; ++j) CHECK(b.values[k * 392 + j] == many.values[k * 20 + j]);

    CHECK_THROWS_AS(schedule_drive(many, EncodingMethod::A, 1.0), ParameterError);
}

// Above-threshold CW output without saturation or spontaneous emission:
// every carrier injected beyond threshold leaves as a photon.
double cw_power_uw(const LaserParams& lp) {
    const double photons = (lp.bias_current_ma - lp.threshold_current_ma) * 1e-3 / 1.602176634e-19;
    return photons * 6.62607015e-34 * 299792458.0 / (lp.emission_wavelength_nm * 1e-9) * 1e6;
}

TEST_CASE("laser below threshold stays dark; above threshold lases") {
    LaserParams lp;
    NodeConfig nc;
    const auto drive = idle_drive(1600);   // 100 ns
    const auto dark = simulate_laser(drive, lp, nc);
    LaserParams hot = lp;
    hot.bias_current_ma = 1.5 * lp.threshold_current_ma;
    CHECK(tail_mean(dark, 8000) < 0.01 * cw_power_uw(hot));

    // The turn-on transient from a fully pumped cold cavity needs a finer step.
    nc.substeps = 64;
    const double above = tail_mean(simulate_laser(drive, hot, nc), 20000);
    CHECK(above == doctest::Approx(cw_power_uw(hot)).epsilon(0.02));
    nc.substeps = 16;
    CHECK_THROWS_AS(simulate_laser(drive, hot, nc), InstabilityError);
}

TEST_CASE("reference rms sets the injection scale") {
    LaserParams lp;
    NodeConfig nc;
    nc.spontaneous_noise = false;
    auto d = schedule_drive(mask_symbols(random_2sps(30, 9), build_mask(20, 5)), EncodingMethod::D, nc.tau_ns);
    const auto base = simulate_laser(d, lp, nc);
    d.reference_rms = data_rms(d);
    CHECK(simulate_laser(d, lp, nc).samples == base.samples);
    d.reference_rms *= 2.0;
    CHECK(simulate_laser(d, lp, nc).samples != base.samples);
}

TEST_CASE("strong injection at zero detuning locks") {
    LaserParams lp;
    NodeConfig nc;
    nc.delta_f_ghz = 0.0;
    nc.injection_power_uw = 2000.0;
    nc.spontaneous_noise = false;
    DriveWaveform d;
    d.values.assign(800, 1.0);
    d.symbol_boundaries = {0};
    d.nodes_per_symbol = 800;
    const auto out = simulate_laser(d, lp, nc);
    double lo = 1e300, hi = 0.0;
    for (std::size_t k = out.size() / 2; k < out.size(); ++k) {
        lo = std::min(lo, out.samples[k]);
        hi = std::max(hi, out.samples[k]);
    }
    CHECK((hi - lo) / hi < 1e-3);
}

TEST_CASE("open loop equals zero feedback and ignores the delay line") {
    LaserParams lp;
    NodeConfig nc;
    nc.method = EncodingMethod::A;
    const auto drive = schedule_drive(mask_symbols(random_2sps(3, 4), build_mask(20, 2)), nc.method, nc.tau_ns);
    const auto open = simulate_laser(drive, lp, nc);
    nc.loop_closed = true;
    nc.feedback_ratio = 0.0;
    CHECK(simulate_laser(drive, lp, nc).samples == open.samples);

    nc.loop_closed = false;
    nc.feedback_ratio = 0.011;
    LaserRunOptions junk;
    junk.initial_history = std::vector<cplx>(static_cast<std::size_t>(nc.slots_per_delay() * nc.substeps), cplx(1e4, -3e3));
    CHECK(simulate_laser(drive, lp, nc, junk).samples == open.samples);

    nc.loop_closed = true;
    CHECK(simulate_laser(drive, lp, nc, junk).samples != open.samples);
}

TEST_CASE("halving the integration step barely changes the output") {
    LaserParams lp;
    NodeConfig nc;
    nc.spontaneous_noise = false;
    nc.loop_closed = true;
    nc.feedback_ratio = 0.0035;
    nc.method = EncodingMethod::C;
    const auto drive = schedule_drive(mask_symbols(random_2sps(60, 5), build_mask(20, 3)), nc.method, nc.tau_ns);
    const auto coarse = simulate_laser(drive, lp, nc);
    nc.substeps = 32;
    const auto fine = simulate_laser(drive, lp, nc);
    REQUIRE(fine.size() == 2 * coarse.size());
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < coarse.size(); ++k) {
        const double d = coarse.samples[k] - fine.samples[2 * k + 1];
        num += d * d;
        den += coarse.samples[k] * coarse.samples[k];
    }
    CHECK(std::sqrt(num / den) < 1e-4);
}

TEST_CASE("symbol isolation under method A depends on the loop") {
    LaserParams lp;
    NodeConfig nc;
    nc.method = EncodingMethod::A;
    nc.detection_reference_uw = 500.0;   // detection noise on, at a pinned level
    const auto mask = build_mask(20, 9);
    auto x = random_2sps(3, 6);
    auto y = x;
    y.samples[2] = 1.0 - y.samples[2];   // perturb symbol 1
    y.samples[3] = 1.0 - y.samples[3];

    // Same electrical gain and noise level for both records.
    const double gain_ref = data_rms(mask_symbols(x, mask));
    const auto states_for = [&](const SampledSignal& in) {
        auto masked = mask_symbols(in, mask);
        masked.reference_rms = gain_ref;
        const auto sched = schedule_drive(masked, nc.method, nc.tau_ns);
        return extract_states(simulate_laser(sched, lp, nc), nc, sched).values;
    };
    auto sx = states_for(x);
    auto sy = states_for(y);
    CHECK(sx.row(1) != sy.row(1));
    CHECK(sx.row(2) == sy.row(2));

    nc.loop_closed = true;
    nc.feedback_ratio = 0.0011;
    sx = states_for(x);
    sy = states_for(y);
    CHECK((sx.row(2) - sy.row(2)).norm() > 1e-6 * sx.row(2).norm());
}

TEST_CASE("state extraction") {
    NodeConfig nc;
    nc.detection_noise = 0.0;
    const auto sched = mask_symbols(random_2sps(100, 7), build_mask(20, 1));
    SampledSignal flat(std::vector<double>(sched.values.size() * static_cast<std::size_t>(nc.substeps), 3.25),
                       16.0 / 62.5e-12);
    const auto st = extract_states(flat, nc, sched);
    CHECK(st.values.rows() == 100);
    CHECK(st.values.cols() == 20);
    CHECK((st.values.array() == 3.25).all());

    SampledSignal short_rec(std::vector<double>(10, 1.0), 1.0);
    CHECK_THROWS_AS(extract_states(short_rec, nc, sched), ParameterError);
}

TEST_CASE("averaging reduces detection noise by sqrt(averages)") {
    NodeConfig nc;
    nc.detection_noise = 0.01;
    const auto sched = mask_symbols(random_2sps(100, 8), build_mask(20, 1));
    const double c = 50.0;
    SampledSignal flat(std::vector<double>(sched.values.size() * static_cast<std::size_t>(nc.substeps), c),
                       16.0 / 62.5e-12);
    double s1 = 0.0, s4 = 0.0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        nc.noise_seed = seed;
        nc.averages = 1;
        s1 += sample_std(extract_states(flat, nc, sched).values, c);
        nc.averages = 4;
        s4 += sample_std(extract_states(flat, nc, sched).values, c);
    }
    s1 /= 100.0;
    s4 /= 100.0;
    CHECK(s1 == doctest::Approx(0.01 * c).epsilon(0.1));
    CHECK(s4 == doctest::Approx(0.01 * c / 2.0).epsilon(0.1));
}

TEST_CASE("node config validation") {
    NodeConfig nc;
    CHECK_NOTHROW(nc.validate());
    nc.n_nodes = 21;
    CHECK_THROWS_AS(nc.validate(), ParameterError);
    nc = NodeConfig{};
    nc.substeps = 8;
    CHECK_THROWS_AS(nc.validate(), ParameterError);
    nc = NodeConfig{};
    nc.tau_ns = 24.51;
    CHECK_THROWS_AS(nc.validate(), ParameterError);
    nc = NodeConfig{};
    nc.detection_reference_uw = -1.0;
    CHECK_THROWS_AS(nc.validate(), ParameterError);
    CHECK(parse_encoding_method("c") == EncodingMethod::C);
    CHECK_THROWS_AS(parse_encoding_method("E"), ParameterError);
}
