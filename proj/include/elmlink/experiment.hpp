#pragma once

#include "elmlink/benchmarks.hpp"
#include "elmlink/errors.hpp"
#include "elmlink/pipeline.hpp"

#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

namespace elmlink {

/// Config syntax or schema error anchored to a line of the source file.
class ConfigError : public ParameterError {
public:
    ConfigError(const std::string& source, int line, const std::string& what);
    int line() const { return line_; }

private:
    int line_;
};

/// One scalar as written in a config file.
struct ConfigValue {
    std::string text;
    double number = 0.0;
    bool is_number = false;
};

struct SweepAxis {
    std::string path;
    std::vector<ConfigValue> values;
    int line = 0;
};

enum class SeedScope {
    Mask,   // seed drives mask and node noise; the link record is shared
    All,    // seed also drives data, DAC, channel and ADC noise
};

struct ExperimentConfig {
    Mode mode = Mode::Elm;
    LinkSetup link;
    NodeConfig node;
    LaserParams laser;
    KkConfig kk;             // CD/baud/detune fields are refreshed from the link setup
    int max_taps = 61;
    double lambda = 0.01;
    bool mc_enabled = false;
    int mc_m_max = 10;
    std::size_t mc_record = 6000;
    bool dump_states = false;
    SeedScope seed_scope = SeedScope::Mask;
    std::uint64_t mask_seed = 1;   // set per run from the seed list
    std::vector<std::uint64_t> seeds{1};
    std::vector<SweepAxis> sweep;

    std::size_t grid_size() const;   // product of sweep lengths (1 without sweep)
};

/// Parses `key.path = value` lines; `sweep.<key.path> = [..]` or
/// `range(start, stop, step)` declares an axis. '#' starts a comment.
ExperimentConfig parse_config(const std::string& text, const std::string& source = "config");
ExperimentConfig load_config(const std::filesystem::path& path);

/// Every settable key path.
std::vector<std::string> config_keys();

/// Applies one key to a config (used for sweep points).
void apply_setting(ExperimentConfig& cfg, const std::string& path, const ConfigValue& value);

/// Checks every grid point; throws ConfigError on the first bad one.
void validate_config(const ExperimentConfig& cfg, const std::string& source = "config");

struct SweepPoint {
    std::size_t index = 0;
    std::vector<ConfigValue> values;   // one per sweep axis
};

/// Grid in canonical order: the first axis varies slowest.
std::vector<SweepPoint> expand_grid(const ExperimentConfig& cfg);

/// Config for one grid point and one seed.
ExperimentConfig resolve_point(const ExperimentConfig& cfg, const SweepPoint& point, std::uint64_t seed);

struct ResultRow {
    std::size_t point_index = 0;
    std::uint64_t seed = 0;
    Mode mode = Mode::Elm;
    std::vector<ConfigValue> sweep_values;
    std::uint64_t mask_seed = 0;
    BerReport ber;
    int selected_taps = 0;
    double mc = std::numeric_limits<double>::quiet_NaN();
    double runtime_s = 0.0;
    std::string error;
};

struct RunOptions {
    int threads = 1;
    std::filesystem::path out_dir = "results";
    std::uint64_t seed_offset = 0;
    bool quiet = false;
};

inline constexpr const char* kResultsSchema = "elmlink-results v1";

/// Runs every (grid point, seed) pair, writes results.csv (and
/// results.timing.csv) atomically into out_dir, returns the CSV path.
std::filesystem::path run_experiment(const ExperimentConfig& cfg, const RunOptions& options);

/// Rows in canonical order. Writes nothing except state dumps when enabled.
std::vector<ResultRow> run_rows(const ExperimentConfig& cfg, const RunOptions& options);

std::string format_float(double x);   // 9 significant digits
std::string results_csv(const ExperimentConfig& cfg, const std::vector<ResultRow>& rows);

struct SummaryRow {
    std::vector<std::string> key;
    std::size_t count = 0;
    double median = 0.0, p25 = 0.0, p75 = 0.0, min = 0.0, max = 0.0;
};

struct Summary {
    std::vector<std::string> group_columns;
    std::vector<SummaryRow> rows;
    std::vector<std::string> warnings;
};

/// Linear-interpolation percentile (q in [0, 1]) of a sorted vector.
double percentile_sorted(const std::vector<double>& sorted, double q);

Summary summarize(const std::string& csv_text, const std::vector<std::string>& group_by);
Summary summarize_file(const std::filesystem::path& csv, const std::vector<std::string>& group_by);
std::string summary_csv(const Summary& summary);

// Binary dumps: 16-byte header {"ELMD", u32 version, u32 rows, u32 cols}
// followed by rows*cols little-endian float32 values, row-major.
inline constexpr std::uint32_t kDumpVersion = 1;
void write_dump(const std::filesystem::path& path, const Eigen::MatrixXd& values);
Eigen::MatrixXd read_dump(const std::filesystem::path& path);

}  // namespace elmlink
