#include "dmmv/data.hpp"

#include "dmmv/errors.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

namespace dmmv::data {

namespace {

std::string trim(std::string s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) cells.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

std::string format_value(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

MultivariateSeries MultivariateSeries::slice(std::size_t begin, std::size_t end) const {
    if (begin > end || end > length()) throw ShapeMismatch("slice outside the series");
    MultivariateSeries out;
    out.names = names;
    for (const auto& v : values) out.values.emplace_back(v.begin() + static_cast<std::ptrdiff_t>(begin),
                                                         v.begin() + static_cast<std::ptrdiff_t>(end));
    if (!timestamps.empty()) {
        out.timestamps.assign(timestamps.begin() + static_cast<std::ptrdiff_t>(begin),
                              timestamps.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return out;
}

void MultivariateSeries::validate() const {
    for (const auto& v : values) {
        if (v.size() != length()) throw ShapeMismatch("variates have unequal lengths");
    }
    if (!names.empty() && names.size() != values.size()) throw ShapeMismatch("name count differs from variate count");
    if (!timestamps.empty() && timestamps.size() != length()) throw ShapeMismatch("timestamp count differs from length");
}

MultivariateSeries read_csv(std::istream& in, const std::string& source) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError(source + ": empty file");
    const auto header = split_line(line);
    if (header.size() < 2) throw ParseError(source + ": need a timestamp column and at least one variate");

    MultivariateSeries series;
    series.names.assign(header.begin() + 1, header.end());
    series.values.resize(header.size() - 1);
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        const auto cells = split_line(line);
        if (cells.size() != header.size()) {
            throw ParseError(source + ": row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                             " cells, expected " + std::to_string(header.size()));
        }
        series.timestamps.push_back(cells[0]);
        for (std::size_t c = 1; c < cells.size(); ++c) {
            const std::string where = source + ": row " + std::to_string(row) + ", column " + std::to_string(c + 1) +
                                      " ('" + header[c] + "')";
            if (cells[c].empty()) throw ParseError(where + ": empty cell");
            const char* begin = cells[c].c_str();
            char* end = nullptr;
            const double v = std::strtod(begin, &end);
            if (end == begin || *end != '\0') throw NonNumericCell(where + ": '" + cells[c] + "' is not a number");
            series.values[c - 1].push_back(v);
        }
    }
    return series;
}

MultivariateSeries load_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    return read_csv(in, path.string());
}

void write_csv(std::ostream& out, const MultivariateSeries& series) {
    series.validate();
    out << "date";
    for (std::size_t d = 0; d < series.variates(); ++d) {
        out << ',' << (series.names.empty() ? "v" + std::to_string(d) : series.names[d]);
    }
    out << '\n';
    for (std::size_t t = 0; t < series.length(); ++t) {
        out << (series.timestamps.empty() ? std::to_string(t) : series.timestamps[t]);
        for (const auto& v : series.values) out << ',' << format_value(v[t]);
        out << '\n';
    }
}

void save_csv(const std::filesystem::path& path, const MultivariateSeries& series) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    write_csv(out, series);
    if (!out) throw IoError("write failed for " + path.string());
}

void SplitSpec::validate() const {
    if (train <= 0 || val < 0 || test <= 0) throw ConfigError("split ratios must be positive");
    if (std::abs(train + val + test - 1.0) > 1e-9) throw ConfigError("split ratios must sum to 1");
}

SplitSizes split_sizes(std::size_t length, const SplitSpec& spec) {
    spec.validate();
    SplitSizes s;
    const auto n = static_cast<double>(length);
    s.train = static_cast<std::size_t>(std::floor(spec.train * n + 1e-9));
    s.val = static_cast<std::size_t>(std::floor(spec.val * n + 1e-9));
    s.test = length - std::min(length, s.train + s.val);
    return s;
}

Splits chronological_split(const MultivariateSeries& series, const SplitSpec& spec) {
    series.validate();
    const auto sizes = split_sizes(series.length(), spec);
    if (sizes.train == 0 || sizes.test == 0 || (spec.val > 0 && sizes.val == 0)) {
        throw EmptySplit("series of length " + std::to_string(series.length()) + " leaves an empty split");
    }
    return {series.slice(0, sizes.train), series.slice(sizes.train, sizes.train + sizes.val),
            series.slice(sizes.train + sizes.val, series.length())};
}

StandardStats fit_standardizer(const MultivariateSeries& train) {
    if (train.length() == 0) throw EmptySplit("cannot fit a standardizer on an empty series");
    StandardStats s;
    for (const auto& v : train.values) {
        double mean = 0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        double var = 0;
        for (double x : v) var += (x - mean) * (x - mean);
        const double sd = std::sqrt(var / static_cast<double>(v.size()));
        s.mean.push_back(mean);
        s.std.push_back(sd > 0 ? sd : 1.0);
    }
    return s;
}

MultivariateSeries standardize(const MultivariateSeries& series, const StandardStats& stats) {
    if (stats.mean.size() != series.variates()) throw ShapeMismatch("standardizer fitted on a different variate count");
    MultivariateSeries out = series;
    for (std::size_t d = 0; d < out.variates(); ++d) {
        for (double& x : out.values[d]) x = (x - stats.mean[d]) / stats.std[d];
    }
    return out;
}

MultivariateSeries inverse_standardize(const MultivariateSeries& series, const StandardStats& stats) {
    if (stats.mean.size() != series.variates()) throw ShapeMismatch("standardizer fitted on a different variate count");
    MultivariateSeries out = series;
    for (std::size_t d = 0; d < out.variates(); ++d) {
        for (double& x : out.values[d]) x = x * stats.std[d] + stats.mean[d];
    }
    return out;
}

StandardStats standardize_splits(Splits& splits) {
    auto stats = fit_standardizer(splits.train);
    splits.train = standardize(splits.train, stats);
    splits.val = standardize(splits.val, stats);
    splits.test = standardize(splits.test, stats);
    return stats;
}

std::size_t window_count(std::size_t length, std::size_t lookback, std::size_t horizon, std::size_t stride) {
    if (stride == 0) throw ConfigError("window stride must be >= 1");
    if (length < lookback + horizon) return 0;
    return (length - lookback - horizon) / stride + 1;
}

std::vector<WindowBatch> window_iter(const MultivariateSeries& series, std::size_t lookback, std::size_t horizon,
                                     std::size_t stride) {
    series.validate();
    const std::size_t count = window_count(series.length(), lookback, horizon, stride);
    std::vector<WindowBatch> out;
    out.reserve(count);
    for (std::size_t w = 0; w < count; ++w) {
        WindowBatch batch;
        batch.start = w * stride;
        for (std::size_t d = 0; d < series.variates(); ++d) {
            const auto& v = series.values[d];
            const auto a = v.begin() + static_cast<std::ptrdiff_t>(batch.start);
            codec::UnivariateWindow win;
            win.lookback.assign(a, a + static_cast<std::ptrdiff_t>(lookback));
            win.target.assign(a + static_cast<std::ptrdiff_t>(lookback),
                              a + static_cast<std::ptrdiff_t>(lookback + horizon));
            win.variate_id = static_cast<int>(d);
            batch.variates.push_back(std::move(win));
        }
        out.push_back(std::move(batch));
    }
    return out;
}

std::vector<codec::UnivariateWindow> flatten(const std::vector<WindowBatch>& batches) {
    std::vector<codec::UnivariateWindow> out;
    for (const auto& b : batches) out.insert(out.end(), b.variates.begin(), b.variates.end());
    return out;
}

std::vector<codec::UnivariateWindow> windows(const MultivariateSeries& series, std::size_t lookback,
                                             std::size_t horizon, std::size_t stride) {
    return flatten(window_iter(series, lookback, horizon, stride));
}

MultivariateSeries synth_decaying_sine(std::size_t total_len, int period, double a_start, double a_end) {
    if (total_len == 0 || period < 1) throw ConfigError("decaying sine needs a positive length and period");
    MultivariateSeries s;
    s.names = {"value"};
    s.values.assign(1, std::vector<double>(total_len));
    const double span = total_len > 1 ? static_cast<double>(total_len - 1) : 1.0;
    for (std::size_t t = 0; t < total_len; ++t) {
        const double a = a_start + (a_end - a_start) * static_cast<double>(t) / span;
        s.values[0][t] = a * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / period);
    }
    return s;
}

MultivariateSeries synth_trend_sine(std::size_t total_len, int period, double slope, double amp, double noise_std,
                                    std::uint64_t seed) {
    if (total_len == 0 || period < 1 || noise_std < 0) throw ConfigError("invalid trend+sine parameters");
    MultivariateSeries s;
    s.names = {"value"};
    s.values.assign(1, std::vector<double>(total_len));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (std::size_t t = 0; t < total_len; ++t) {
        const double tt = static_cast<double>(t);
        double v = slope * tt + amp * std::sin(2.0 * std::numbers::pi * tt / period);
        if (noise_std > 0) v += noise_std * noise(rng);
        s.values[0][t] = v;
    }
    return s;
}

const std::vector<DatasetPreset>& presets() {
    static const std::vector<DatasetPreset> table = {
        {"etth1", 24, 336, {0.6, 0.2, 0.2}},       {"etth2", 24, 336, {0.6, 0.2, 0.2}},
        {"ettm1", 96, 336, {0.6, 0.2, 0.2}},       {"ettm2", 96, 336, {0.6, 0.2, 0.2}},
        {"weather", 144, 336, {0.7, 0.1, 0.2}},    {"electricity", 24, 336, {0.7, 0.1, 0.2}},
        {"traffic", 24, 336, {0.7, 0.1, 0.2}},     {"illness", 52, 104, {0.7, 0.1, 0.2}},
    };
    return table;
}

std::optional<DatasetPreset> find_preset(const std::string& name) {
    for (const auto& p : presets()) {
        if (p.name == name) return p;
    }
    return std::nullopt;
}

} // namespace dmmv::data
