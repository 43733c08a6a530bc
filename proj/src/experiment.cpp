#include "elmlink/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <future>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>

namespace elmlink {
namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::string anchor(const std::string& source, int line, const std::string& what) {
    return line > 0 ? source + ":" + std::to_string(line) + ": " + what : source + ": " + what;
}

ConfigValue parse_scalar(const std::string& raw) {
    ConfigValue v;
    std::string t = trim(raw);
    if (t.size() >= 2 && t.front() == '"' && t.back() == '"') {
        v.text = t.substr(1, t.size() - 2);
        return v;
    }
    v.text = t;
    if (t == "inf" || t == "+inf") {
        v.number = std::numeric_limits<double>::infinity();
        v.is_number = true;
    } else if (t == "-inf") {
        v.number = -std::numeric_limits<double>::infinity();
        v.is_number = true;
    } else if (!t.empty()) {
        char* end = nullptr;
        const double d = std::strtod(t.c_str(), &end);
        if (end == t.c_str() + t.size()) {
            v.number = d;
            v.is_number = true;
        }
    }
    return v;
}

std::vector<std::string> split_list(const std::string& body) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (char c : body) {
        if (c == '"') quoted = !quoted;
        if (c == ',' && !quoted) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!trim(cur).empty() || !out.empty()) out.push_back(trim(cur));
    return out;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// --- typed setters ----------------------------------------------------------

double as_double(const ConfigValue& v) {
    if (!v.is_number) throw ParameterError("expected a number, got '" + v.text + "'");
    return v.number;
}

bool as_bool(const ConfigValue& v) {
    if (v.text == "true" || v.text == "1") return true;
    if (v.text == "false" || v.text == "0") return false;
    throw ParameterError("expected true or false, got '" + v.text + "'");
}

template <typename Int>
Int as_integer(const ConfigValue& v) {
    Int out{};
    const char* b = v.text.data();
    const char* e = b + v.text.size();
    const auto [ptr, ec] = std::from_chars(b, e, out);
    if (ec == std::errc() && ptr == e) return out;
    if (v.is_number && std::isfinite(v.number) && v.number == std::floor(v.number)) {
        if constexpr (std::is_unsigned_v<Int>) {
            if (v.number < 0) throw ParameterError("expected a non-negative integer, got '" + v.text + "'");
        }
        return static_cast<Int>(v.number);
    }
    throw ParameterError("expected an integer, got '" + v.text + "'");
}

using Setter = std::function<void(ExperimentConfig&, const ConfigValue&)>;

template <typename Proj>
Setter make_setter(Proj proj) {
    return [proj](ExperimentConfig& c, const ConfigValue& v) {
        auto& ref = proj(c);
        using T = std::remove_reference_t<decltype(ref)>;
        if constexpr (std::is_same_v<T, double>) {
            ref = as_double(v);
        } else if constexpr (std::is_same_v<T, bool>) {
            ref = as_bool(v);
        } else if constexpr (std::is_integral_v<T>) {
            ref = as_integer<T>(v);
        } else if constexpr (std::is_same_v<T, EncodingMethod>) {
            ref = parse_encoding_method(v.text);
        } else if constexpr (std::is_same_v<T, Mode>) {
            ref = parse_mode(v.text);
        } else if constexpr (std::is_same_v<T, SeedScope>) {
            if (v.text == "mask") ref = SeedScope::Mask;
            else if (v.text == "all") ref = SeedScope::All;
            else throw ParameterError("seed_scope must be 'mask' or 'all'");
        } else {
            static_assert(sizeof(T) == 0, "unsupported config field type");
        }
    };
}

#define ELM_FIELD(path, expr) {path, make_setter([](ExperimentConfig& c) -> auto& { return expr; })}

const std::map<std::string, Setter>& registry() {
    static const std::map<std::string, Setter> fields = {
        ELM_FIELD("mode", c.mode),
        ELM_FIELD("seed_scope", c.seed_scope),
        ELM_FIELD("tx.baud", c.link.tx.baud),
        ELM_FIELD("tx.beta", c.link.tx.beta),
        ELM_FIELD("tx.carrier_detune", c.link.tx.carrier_detune),
        ELM_FIELD("tx.cspr_db", c.link.tx.cspr_db),
        ELM_FIELD("tx.dac_enob", c.link.tx.dac_enob),
        ELM_FIELD("tx.preemph_corner", c.link.tx.preemph_corner),
        ELM_FIELD("tx.sps", c.link.tx.sps),
        ELM_FIELD("tx.rrc_span", c.link.tx.rrc_span),
        ELM_FIELD("tx.output_power", c.link.tx.output_power),
        ELM_FIELD("tx.dac_seed", c.link.tx.dac_seed),
        ELM_FIELD("fiber.length_km", c.link.fiber.length_km),
        ELM_FIELD("fiber.beta2_ps2_per_km", c.link.fiber.beta2_ps2_per_km),
        ELM_FIELD("fiber.gamma_per_w_km", c.link.fiber.gamma_per_w_km),
        ELM_FIELD("fiber.alpha_db_per_km", c.link.fiber.alpha_db_per_km),
        ELM_FIELD("fiber.step_km", c.link.fiber.step_km),
        ELM_FIELD("fiber.check_convergence", c.link.fiber.check_convergence),
        ELM_FIELD("link.launch_power_dbm", c.link.link.launch_power_dbm),
        ELM_FIELD("link.target_osnr_db", c.link.link.target_osnr_db),
        ELM_FIELD("link.rx_filter_bw", c.link.link.rx_filter_bw),
        ELM_FIELD("link.pd_bandwidth", c.link.link.pd_bandwidth),
        ELM_FIELD("link.adc_rate", c.link.link.adc_rate),
        ELM_FIELD("link.adc_enob", c.link.link.adc_enob),
        ELM_FIELD("link.neighbor_noise_ratio", c.link.link.neighbor_noise_ratio),
        ELM_FIELD("link.neighbor_phase_noise_rad", c.link.link.neighbor_phase_noise_rad),
        ELM_FIELD("link.noise_seed", c.link.link.noise_seed),
        ELM_FIELD("link.data_seed", c.link.data_seed),
        ELM_FIELD("link.guard_symbols", c.link.guard_symbols),
        ELM_FIELD("split.train", c.link.split.train),
        ELM_FIELD("split.buffer", c.link.split.buffer),
        ELM_FIELD("split.test", c.link.split.test),
        ELM_FIELD("node.theta_ps", c.node.theta_ps),
        ELM_FIELD("node.tau_ns", c.node.tau_ns),
        ELM_FIELD("node.n_nodes", c.node.n_nodes),
        ELM_FIELD("node.delta_f_ghz", c.node.delta_f_ghz),
        ELM_FIELD("node.feedback_ratio", c.node.feedback_ratio),
        ELM_FIELD("node.loop_closed", c.node.loop_closed),
        ELM_FIELD("node.feedback_phase_rad", c.node.feedback_phase_rad),
        ELM_FIELD("node.injection_power_uw", c.node.injection_power_uw),
        ELM_FIELD("node.averages", c.node.averages),
        ELM_FIELD("node.method", c.node.method),
        ELM_FIELD("node.substeps", c.node.substeps),
        ELM_FIELD("node.drive_bandwidth_ghz", c.node.drive_bandwidth_ghz),
        ELM_FIELD("node.detection_bandwidth_ghz", c.node.detection_bandwidth_ghz),
        ELM_FIELD("node.detection_noise", c.node.detection_noise),
        ELM_FIELD("node.detection_reference_uw", c.node.detection_reference_uw),
        ELM_FIELD("node.spontaneous_noise", c.node.spontaneous_noise),
        ELM_FIELD("laser.bias_current_ma", c.laser.bias_current_ma),
        ELM_FIELD("laser.threshold_current_ma", c.laser.threshold_current_ma),
        ELM_FIELD("laser.linewidth_enhancement", c.laser.linewidth_enhancement),
        ELM_FIELD("laser.photon_lifetime_ps", c.laser.photon_lifetime_ps),
        ELM_FIELD("laser.carrier_lifetime_ns", c.laser.carrier_lifetime_ns),
        ELM_FIELD("laser.injection_coupling_per_s", c.laser.injection_coupling_per_s),
        ELM_FIELD("laser.emission_wavelength_nm", c.laser.emission_wavelength_nm),
        ELM_FIELD("laser.differential_gain_per_s", c.laser.differential_gain_per_s),
        ELM_FIELD("laser.gain_saturation", c.laser.gain_saturation),
        ELM_FIELD("laser.spontaneous_emission_factor", c.laser.spontaneous_emission_factor),
        ELM_FIELD("readout.max_taps", c.max_taps),
        ELM_FIELD("readout.lambda", c.lambda),
        ELM_FIELD("mc.enabled", c.mc_enabled),
        ELM_FIELD("mc.m_max", c.mc_m_max),
        ELM_FIELD("mc.record", c.mc_record),
        ELM_FIELD("kk.upsample_factor", c.kk.upsample_factor),
        ELM_FIELD("kk.ffe_taps", c.kk.ffe_taps),
        ELM_FIELD("kk.intensity_floor", c.kk.intensity_floor),
        ELM_FIELD("dump.states", c.dump_states),
    };
    return fields;
}

#undef ELM_FIELD

std::vector<ConfigValue> parse_range(const std::string& body) {
    const auto parts = split_list(body);
    if (parts.size() != 3) throw ParameterError("range() takes (start, stop, step)");
    const double a = as_double(parse_scalar(parts[0]));
    const double b = as_double(parse_scalar(parts[1]));
    const double step = as_double(parse_scalar(parts[2]));
    if (!(step > 0.0) || b < a || !std::isfinite(a) || !std::isfinite(b))
        throw ParameterError("range() needs finite start <= stop and step > 0");
    const auto count = static_cast<std::size_t>(std::floor((b - a) / step + 1e-9)) + 1;
    std::vector<ConfigValue> out;
    for (std::size_t i = 0; i < count; ++i) {
        ConfigValue v;
        v.number = a + static_cast<double>(i) * step;
        v.is_number = true;
        v.text = format_float(v.number);
        out.push_back(v);
    }
    return out;
}

// --- CSV helpers ----------------------------------------------------------------

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c == '\n' ? ' ' : c;
    }
    return out + "\"";
}

std::vector<std::string> csv_split(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

std::string value_cell(const ConfigValue& v) { return v.is_number ? format_float(v.number) : v.text; }

void write_atomic(const std::filesystem::path& path, const std::string& content) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw SimulationError("cannot write " + tmp.string());
        os << content;
        if (!os) throw SimulationError("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::string link_key(const LinkSetup& s) {
    std::ostringstream os;
    os.precision(17);
    const auto& t = s.tx;
    const auto& f = s.fiber;
    const auto& l = s.link;
    os << t.baud << ' ' << t.beta << ' ' << t.carrier_detune << ' ' << t.cspr_db << ' ' << t.dac_enob << ' '
       << t.preemph_corner << ' ' << t.sps << ' ' << t.rrc_span << ' ' << t.output_power << ' ' << t.dac_seed << '|'
       << f.length_km << ' ' << f.beta2_ps2_per_km << ' ' << f.gamma_per_w_km << ' ' << f.alpha_db_per_km << ' '
       << f.step_km << ' ' << f.check_convergence << '|' << l.launch_power_dbm << ' ' << l.target_osnr_db << ' '
       << l.rx_filter_bw << ' ' << l.pd_bandwidth << ' ' << l.adc_rate << ' ' << l.adc_enob << ' '
       << l.neighbor_noise_ratio << ' ' << l.neighbor_phase_noise_rad << ' ' << l.noise_seed << '|'
       << s.split.train << ' ' << s.split.buffer << ' ' << s.split.test << ' ' << s.guard_symbols << ' '
       << s.data_seed;
    return os.str();
}

class LinkCache {
public:
    std::shared_ptr<const LinkRecord> get(const LinkSetup& setup) {
        const std::string key = link_key(setup);
        std::shared_future<std::shared_ptr<const LinkRecord>> fut;
        std::promise<std::shared_ptr<const LinkRecord>> promise;
        bool owner = false;
        {
            std::lock_guard<std::mutex> lock(mu_);
            auto it = entries_.find(key);
            if (it == entries_.end()) {
                fut = promise.get_future().share();
                entries_.emplace(key, fut);
                owner = true;
            } else {
                fut = it->second;
            }
        }
        if (owner) {
            try {
                promise.set_value(std::make_shared<const LinkRecord>(simulate_link(setup)));
            } catch (...) {
                promise.set_exception(std::current_exception());
            }
        }
        return fut.get();
    }

private:
    std::mutex mu_;
    std::map<std::string, std::shared_future<std::shared_ptr<const LinkRecord>>> entries_;
};

}  // namespace

ConfigError::ConfigError(const std::string& source, int line, const std::string& what)
    : ParameterError(anchor(source, line, what)), line_(line) {}

std::size_t ExperimentConfig::grid_size() const {
    std::size_t n = 1;
    for (const auto& axis : sweep) n *= axis.values.size();
    return n;
}

std::vector<std::string> config_keys() {
    std::vector<std::string> keys;
    for (const auto& [k, _] : registry()) keys.push_back(k);
    keys.push_back("seeds");
    std::sort(keys.begin(), keys.end());
    return keys;
}

void apply_setting(ExperimentConfig& cfg, const std::string& path, const ConfigValue& value) {
    const auto& reg = registry();
    const auto it = reg.find(path);
    if (it == reg.end()) throw ParameterError("unknown key '" + path + "'");
    it->second(cfg, value);
}

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
    ExperimentConfig cfg;
    std::map<std::string, int> seen;
    std::istringstream is(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(is, raw)) {
        ++line_no;
        bool quoted = false;
        for (std::size_t i = 0; i < raw.size(); ++i) {
            if (raw[i] == '"') quoted = !quoted;
            if (raw[i] == '#' && !quoted) {
                raw.resize(i);
                break;
            }
        }
        const std::string line = trim(raw);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(source, line_no, "expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError(source, line_no, "missing key before '='");
        if (val.empty()) throw ConfigError(source, line_no, "missing value for '" + key + "'");
        if (const auto [it, fresh] = seen.emplace(key, line_no); !fresh)
            throw ConfigError(source, line_no, "duplicate key '" + key + "' (first set on line " +
                                                   std::to_string(it->second) + ")");

        try {
            const bool is_array = val.front() == '[';
            const bool is_range = val.rfind("range(", 0) == 0;
            if (is_array && val.back() != ']') throw ParameterError("unterminated array");
            if (is_range && val.back() != ')') throw ParameterError("unterminated range()");

            std::vector<ConfigValue> list;
            if (is_array) {
                for (const auto& item : split_list(val.substr(1, val.size() - 2))) {
                    if (item.empty()) throw ParameterError("empty array element");
                    list.push_back(parse_scalar(item));
                }
            } else if (is_range) {
                list = parse_range(val.substr(6, val.size() - 7));
            }

            if (key == "seeds") {
                if (!is_array && !is_range) list.push_back(parse_scalar(val));
                if (list.empty()) throw ParameterError("seeds must not be empty");
                cfg.seeds.clear();
                for (const auto& v : list) cfg.seeds.push_back(as_integer<std::uint64_t>(v));
            } else if (key.rfind("sweep.", 0) == 0) {
                const std::string path = key.substr(6);
                if (!registry().count(path)) throw ParameterError("unknown sweep key '" + path + "'");
                if (!is_array && !is_range) list.push_back(parse_scalar(val));
                if (list.empty()) throw ParameterError("sweep axis '" + path + "' has no values");
                ExperimentConfig probe = cfg;
                for (const auto& v : list) apply_setting(probe, path, v);
                cfg.sweep.push_back({path, list, line_no});
            } else {
                if (is_array || is_range) throw ParameterError("'" + key + "' takes a single value");
                apply_setting(cfg, key, parse_scalar(val));
            }
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            throw ConfigError(source, line_no, e.what());
        }
    }
    for (const auto& axis : cfg.sweep) {
        if (seen.count(axis.path))
            throw ConfigError(source, axis.line, "'" + axis.path + "' is both set and swept");
    }
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError(path.string(), 0, "cannot open file");
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_config(ss.str(), path.string());
}

std::vector<SweepPoint> expand_grid(const ExperimentConfig& cfg) {
    const std::size_t n = cfg.grid_size();
    std::vector<SweepPoint> points(n);
    for (std::size_t i = 0; i < n; ++i) {
        points[i].index = i;
        std::size_t rem = i;
        points[i].values.resize(cfg.sweep.size());
        for (std::size_t a = cfg.sweep.size(); a-- > 0;) {
            const auto& vals = cfg.sweep[a].values;
            points[i].values[a] = vals[rem % vals.size()];
            rem /= vals.size();
        }
    }
    return points;
}

ExperimentConfig resolve_point(const ExperimentConfig& cfg, const SweepPoint& point, std::uint64_t seed) {
    ExperimentConfig out = cfg;
    for (std::size_t a = 0; a < cfg.sweep.size(); ++a) apply_setting(out, cfg.sweep[a].path, point.values[a]);
    out.mask_seed = seed;
    out.node.noise_seed = mix_seed(seed, 1);
    if (cfg.seed_scope == SeedScope::All) {
        out.link.data_seed = mix_seed(seed, 2);
        out.link.link.noise_seed = mix_seed(seed, 3);
        out.link.tx.dac_seed = mix_seed(seed, 4);
    }
    if (out.mode == Mode::Elm) out.node.loop_closed = false;
    if (out.mode == Mode::Tdrc) out.node.loop_closed = true;
    const KkConfig derived = kk_config_for(out.link);
    out.kk.cd_length_km = derived.cd_length_km;
    out.kk.cd_beta2_ps2_per_km = derived.cd_beta2_ps2_per_km;
    out.kk.matched_beta = derived.matched_beta;
    out.kk.baud = derived.baud;
    out.kk.carrier_detune = derived.carrier_detune;
    return out;
}

void validate_config(const ExperimentConfig& cfg, const std::string& source) {
    if (cfg.seeds.empty()) throw ConfigError(source, 0, "seeds must not be empty");
    for (const auto& point : expand_grid(cfg)) {
        try {
            const ExperimentConfig c = resolve_point(cfg, point, cfg.seeds.front());
            c.link.tx.validate();
            c.link.fiber.validate();
            c.link.link.validate(c.link.tx);
            c.link.split.validate(c.link.record_symbols() - c.link.guard_symbols);
            if (c.max_taps < 1 || c.max_taps % 2 == 0) throw ParameterError("readout.max_taps must be odd and >= 1");
            if (!(c.lambda >= 0.0)) throw ParameterError("readout.lambda must be >= 0");
            if (c.mode == Mode::Kk) {
                c.kk.validate();
            } else if (c.mode != Mode::RawLr) {
                c.laser.validate();
                c.node.validate();
                build_mask(c.node.n_nodes, 1);
                if (c.mc_enabled && c.mc_record < 5000) throw ParameterError("mc.record must be >= 5000");
            }
        } catch (const std::exception& e) {
            std::string where;
            for (std::size_t a = 0; a < cfg.sweep.size(); ++a)
                where += (a ? ", " : "") + cfg.sweep[a].path + "=" + value_cell(point.values[a]);
            const int line = cfg.sweep.empty() ? 0 : cfg.sweep.front().line;
            throw ConfigError(source, line,
                              where.empty() ? e.what() : "at sweep point (" + where + "): " + e.what());
        }
    }
}

std::vector<ResultRow> run_rows(const ExperimentConfig& cfg, const RunOptions& options) {
    const auto points = expand_grid(cfg);
    const std::size_t n_seeds = cfg.seeds.size();
    const std::size_t total = points.size() * n_seeds;
    std::vector<ResultRow> rows(total);
    LinkCache cache;
    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> done{0};
    std::mutex log_mu;

    const auto work = [&]() {
        for (;;) {
            const std::size_t t = next.fetch_add(1);
            if (t >= total) return;
            const SweepPoint& point = points[t / n_seeds];
            const std::uint64_t seed = cfg.seeds[t % n_seeds] + options.seed_offset;
            ResultRow& row = rows[t];
            row.point_index = point.index;
            row.seed = seed;
            row.sweep_values = point.values;
            row.mask_seed = seed;
            row.mode = cfg.mode;
            const auto t0 = std::chrono::steady_clock::now();
            try {
                const ExperimentConfig c = resolve_point(cfg, point, seed);
                row.mode = c.mode;
                const auto rec = cache.get(c.link);
                StateMatrix states;
                StateMatrix* dump_target = c.dump_states ? &states : nullptr;
                ReadoutResult res;
                switch (c.mode) {
                    case Mode::RawLr: res = evaluate_raw_lr(*rec, c.max_taps, c.lambda, dump_target); break;
                    case Mode::Kk: res = evaluate_kk(*rec, c.kk); break;
                    case Mode::Elm:
                    case Mode::Tdrc: {
                        const Mask mask = build_mask(c.node.n_nodes, c.mask_seed);
                        res = evaluate_node(*rec, mask, c.laser, c.node, c.max_taps, c.lambda, dump_target);
                        if (c.mc_enabled) {
                            McOptions mo;
                            mo.record = c.mc_record;
                            mo.mask_seed = c.mask_seed;
                            mo.input_seed = mix_seed(seed, 5);
                            mo.lambda = c.lambda;
                            row.mc = memory_capacity(c.node, c.laser, c.mc_m_max, mo).mc;
                        }
                        break;
                    }
                }
                row.ber = res.ber;
                row.selected_taps = res.taps;
                if (dump_target && states.values.size() > 0) {
                    const auto dir = options.out_dir / "dumps";
                    std::filesystem::create_directories(dir);
                    write_dump(dir / ("point_" + std::to_string(point.index) + "_seed_" + std::to_string(seed) + ".bin"),
                               states.values);
                }
            } catch (const std::exception& e) {
                row.error = e.what();
            }
            row.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            const std::size_t finished = ++done;
            if (!options.quiet) {
                std::lock_guard<std::mutex> lock(log_mu);
                std::cerr << "[" << finished << "/" << total << "] point " << point.index << " seed " << seed << ": "
                          << (row.error.empty() ? "log10_ber=" + format_float(row.ber.log10_ber) : "error: " + row.error)
                          << " (" << format_float(row.runtime_s) << " s)\n";
            }
        }
    };

    const int n_threads = std::max(1, std::min<int>(options.threads, static_cast<int>(total)));
    if (n_threads == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < n_threads; ++i) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }
    return rows;
}

std::string format_float(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", x);
    return buf;
}

std::string results_csv(const ExperimentConfig& cfg, const std::vector<ResultRow>& rows) {
    std::ostringstream os;
    os << "# " << kResultsSchema << "\n";
    // A swept mode already shows in the mode column.
    os << "point_index,seed,mode";
    for (const auto& axis : cfg.sweep)
        if (axis.path != "mode") os << ',' << csv_field(axis.path);
    os << ",mask_seed,log10_ber,log10_ber_bound,bit_errors,bits,hd_fec_pass,selected_taps,mc,error\n";
    for (const auto& r : rows) {
        os << r.point_index << ',' << r.seed << ',' << to_string(r.mode);
        for (std::size_t a = 0; a < r.sweep_values.size(); ++a)
            if (cfg.sweep[a].path != "mode") os << ',' << csv_field(value_cell(r.sweep_values[a]));
        os << ',' << r.mask_seed;
        if (r.error.empty()) {
            os << ',' << format_float(r.ber.log10_ber) << ',' << format_float(r.ber.log10_ber_bound) << ','
               << r.ber.bit_errors << ',' << r.ber.bits << ',' << (r.ber.hd_fec_pass ? 1 : 0) << ','
               << r.selected_taps << ',' << (std::isnan(r.mc) ? "" : format_float(r.mc)) << ",";
        } else {
            os << ",,,,,,,," << csv_field(r.error);
        }
        os << '\n';
    }
    return os.str();
}

std::filesystem::path run_experiment(const ExperimentConfig& cfg, const RunOptions& options) {
    std::filesystem::create_directories(options.out_dir);
    const auto rows = run_rows(cfg, options);
    const auto csv = options.out_dir / "results.csv";
    write_atomic(csv, results_csv(cfg, rows));

    std::ostringstream timing;
    timing << "# elmlink-timing v1\npoint_index,seed,runtime_s\n";
    for (const auto& r : rows) timing << r.point_index << ',' << r.seed << ',' << format_float(r.runtime_s) << '\n';
    write_atomic(options.out_dir / "results.timing.csv", timing.str());
    return csv;
}

double percentile_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) throw ParameterError("percentile of an empty set");
    if (q <= 0.0) return sorted.front();
    if (q >= 1.0) return sorted.back();
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const double frac = pos - static_cast<double>(lo);
    const double a = sorted[lo];
    if (frac == 0.0 || lo + 1 >= sorted.size()) return a;
    const double b = sorted[lo + 1];
    if (a == b) return a;
    if (std::isinf(a)) return a;
    return a + frac * (b - a);
}

Summary summarize(const std::string& csv_text, const std::vector<std::string>& group_by) {
    std::istringstream is(csv_text);
    std::string line;
    std::vector<std::string> header;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        header = csv_split(line);
        break;
    }
    if (header.empty()) throw ParameterError("results file has no header row");
    const auto col = [&](const std::string& name) -> std::size_t {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw ParameterError("unknown column '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t ber_col = col("log10_ber");
    std::vector<std::size_t> key_cols;
    for (const auto& g : group_by) key_cols.push_back(col(g));

    Summary summary;
    summary.group_columns = group_by;
    std::vector<std::vector<std::string>> keys;
    std::vector<std::vector<double>> values;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        const auto cells = csv_split(line);
        if (cells.size() != header.size())
            throw ParameterError("row " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                                 " cells, header has " + std::to_string(header.size()));
        std::vector<std::string> key;
        for (auto c : key_cols) key.push_back(cells[c]);
        auto it = std::find(keys.begin(), keys.end(), key);
        if (it == keys.end()) {
            keys.push_back(key);
            values.emplace_back();
            it = keys.end() - 1;
        }
        const std::string& cell = cells[ber_col];
        if (!cell.empty()) values[static_cast<std::size_t>(it - keys.begin())].push_back(std::strtod(cell.c_str(), nullptr));
    }

    for (std::size_t g = 0; g < keys.size(); ++g) {
        auto v = values[g];
        if (v.empty()) {
            std::string k;
            for (std::size_t i = 0; i < keys[g].size(); ++i) k += (i ? "," : "") + group_by[i] + "=" + keys[g][i];
            summary.warnings.push_back("group (" + k + ") has no successful rows; omitted");
            continue;
        }
        std::sort(v.begin(), v.end());
        SummaryRow r;
        r.key = keys[g];
        r.count = v.size();
        r.median = percentile_sorted(v, 0.5);
        r.p25 = percentile_sorted(v, 0.25);
        r.p75 = percentile_sorted(v, 0.75);
        r.min = v.front();
        r.max = v.back();
        summary.rows.push_back(r);
    }
    return summary;
}

Summary summarize_file(const std::filesystem::path& csv, const std::vector<std::string>& group_by) {
    std::ifstream is(csv);
    if (!is) throw ParameterError("cannot open " + csv.string());
    std::stringstream ss;
    ss << is.rdbuf();
    return summarize(ss.str(), group_by);
}

std::string summary_csv(const Summary& summary) {
    std::ostringstream os;
    os << "# elmlink-summary v1\n";
    for (const auto& g : summary.group_columns) os << csv_field(g) << ',';
    os << "count,median,p25,p75,min,max\n";
    for (const auto& r : summary.rows) {
        for (const auto& k : r.key) os << csv_field(k) << ',';
        os << r.count << ',' << format_float(r.median) << ',' << format_float(r.p25) << ',' << format_float(r.p75)
           << ',' << format_float(r.min) << ',' << format_float(r.max) << '\n';
    }
    return os.str();
}

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(const unsigned char* b) {
    return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
           static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
}

}  // namespace

void write_dump(const std::filesystem::path& path, const Eigen::MatrixXd& values) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw SimulationError("cannot write " + path.string());
    os.write("ELMD", 4);
    put_u32(os, kDumpVersion);
    put_u32(os, static_cast<std::uint32_t>(values.rows()));
    put_u32(os, static_cast<std::uint32_t>(values.cols()));
    for (Eigen::Index r = 0; r < values.rows(); ++r)
        for (Eigen::Index c = 0; c < values.cols(); ++c) {
            const float f = static_cast<float>(values(r, c));
            std::uint32_t bits;
            std::memcpy(&bits, &f, 4);
            put_u32(os, bits);
        }
}

Eigen::MatrixXd read_dump(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ParameterError("cannot open " + path.string());
    unsigned char head[16];
    if (!is.read(reinterpret_cast<char*>(head), 16) || std::memcmp(head, "ELMD", 4) != 0)
        throw ParameterError(path.string() + ": not a dump file");
    if (get_u32(head + 4) != kDumpVersion) throw ParameterError(path.string() + ": unsupported dump version");
    const std::uint32_t rows = get_u32(head + 8);
    const std::uint32_t cols = get_u32(head + 12);
    Eigen::MatrixXd out(rows, cols);
    unsigned char b[4];
    for (std::uint32_t r = 0; r < rows; ++r)
        for (std::uint32_t c = 0; c < cols; ++c) {
            if (!is.read(reinterpret_cast<char*>(b), 4)) throw ParameterError(path.string() + ": truncated");
            const std::uint32_t bits = get_u32(b);
            float f;
            std::memcpy(&f, &bits, 4);
            out(r, c) = f;
        }
    return out;
}

}  // namespace elmlink
