#pragma once

// Multivariate series ingestion, chronological splits, z-scoring fitted on
// the training part, sliding windows and the synthetic generators.

#include "dmmv/codec.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace dmmv::data {

struct MultivariateSeries {
    std::vector<std::vector<double>> values; // [D][len]
    std::vector<std::string> names;
    std::vector<std::string> timestamps;     // empty when not known

    std::size_t variates() const { return values.size(); }
    std::size_t length() const { return values.empty() ? 0 : values.front().size(); }
    /// Columns [begin, end) of every variate.
    MultivariateSeries slice(std::size_t begin, std::size_t end) const;
    /// Throws ShapeMismatch on ragged variates.
    void validate() const;
};

/// First column is a timestamp, the rest are numeric variates named by the
/// header row.
MultivariateSeries read_csv(std::istream& in, const std::string& source = "<stream>");
MultivariateSeries load_csv(const std::filesystem::path& path);
void write_csv(std::ostream& out, const MultivariateSeries& series);
void save_csv(const std::filesystem::path& path, const MultivariateSeries& series);

struct SplitSpec {
    double train = 0.7;
    double val = 0.1;
    double test = 0.2;

    void validate() const;
};

struct Splits {
    MultivariateSeries train;
    MultivariateSeries val;
    MultivariateSeries test;
};

/// Row counts floor(ratio * len) for train and validation; test takes the rest.
struct SplitSizes {
    std::size_t train = 0;
    std::size_t val = 0;
    std::size_t test = 0;
};
SplitSizes split_sizes(std::size_t length, const SplitSpec& spec);
Splits chronological_split(const MultivariateSeries& series, const SplitSpec& spec);

struct StandardStats {
    std::vector<double> mean;
    std::vector<double> std;
};

StandardStats fit_standardizer(const MultivariateSeries& train);
MultivariateSeries standardize(const MultivariateSeries& series, const StandardStats& stats);
MultivariateSeries inverse_standardize(const MultivariateSeries& series, const StandardStats& stats);
/// Fits on `splits.train` and applies to all three parts.
StandardStats standardize_splits(Splits& splits);

struct WindowBatch {
    std::size_t start = 0;
    std::vector<codec::UnivariateWindow> variates;
};

/// floor((len - T - H) / stride) + 1, or 0 when a single window does not fit.
std::size_t window_count(std::size_t length, std::size_t lookback, std::size_t horizon, std::size_t stride = 1);
std::vector<WindowBatch> window_iter(const MultivariateSeries& series, std::size_t lookback, std::size_t horizon,
                                     std::size_t stride = 1);
/// Windows of every variate, ordered by start then variate.
std::vector<codec::UnivariateWindow> flatten(const std::vector<WindowBatch>& batches);
std::vector<codec::UnivariateWindow> windows(const MultivariateSeries& series, std::size_t lookback,
                                             std::size_t horizon, std::size_t stride = 1);

/// x(t) = A(t) sin(2 pi t / P), A linear from a_start at t=0 to a_end at the last step.
MultivariateSeries synth_decaying_sine(std::size_t total_len, int period = 24, double a_start = 1.0,
                                       double a_end = 0.1);

/// x(t) = slope t + amp sin(2 pi t / P) + N(0, noise_std^2).
MultivariateSeries synth_trend_sine(std::size_t total_len, int period, double slope, double amp, double noise_std,
                                    std::uint64_t seed);

struct DatasetPreset {
    std::string name;
    int period = 24;
    int lookback = 336;
    SplitSpec split;
};

/// Sampling-frequency defaults: hourly 24, 15-minute 96, 10-minute 144, weekly 52.
std::optional<DatasetPreset> find_preset(const std::string& name);
const std::vector<DatasetPreset>& presets();

} // namespace dmmv::data
