#include "dmmv/codec.hpp"

#include "dmmv/errors.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <string>

#include <unsupported/Eigen/FFT>

namespace dmmv::codec {

namespace {

struct Tap {
    std::size_t lo;
    std::size_t hi;
    double frac;
};

Tap resize_tap(std::size_t i, std::size_t n_in, std::size_t n_out) {
    double src = (static_cast<double>(i) + 0.5) * static_cast<double>(n_in) / static_cast<double>(n_out) - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(n_in - 1));
    const auto lo = static_cast<std::size_t>(std::floor(src));
    const auto hi = std::min(lo + 1, n_in - 1);
    return {lo, hi, src - static_cast<double>(lo)};
}

std::vector<Tap> resize_taps(std::size_t n_in, std::size_t n_out) {
    std::vector<Tap> taps(n_out);
    for (std::size_t i = 0; i < n_out; ++i) taps[i] = resize_tap(i, n_in, n_out);
    return taps;
}

void check_finite(std::span<const double> values) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i])) {
            throw NonFiniteInput("value at index " + std::to_string(i) + " is not finite");
        }
    }
}

} // namespace

ImagingGeometry ImagingGeometry::forecast(int lookback_len, int horizon, int period, int image_size,
                                          int patch_size, int channels) {
    if (period < 1) throw GeometryMismatch("period must be >= 1");
    if (period > lookback_len) {
        throw PeriodTooLarge("period " + std::to_string(period) + " exceeds look-back length " +
                             std::to_string(lookback_len));
    }
    if (horizon < 1) throw GeometryMismatch("forecast layout needs a horizon >= 1");
    ImagingGeometry g;
    g.period = period;
    g.n_lookback = lookback_len / period;
    g.n_forecast = (horizon + period - 1) / period;
    g.image_size = image_size;
    g.patch_size = patch_size;
    g.channels = channels;
    if (patch_size < 1 || image_size % patch_size != 0) {
        throw GeometryMismatch("image size must be a multiple of the patch size");
    }
    g.boundary_col = boundary_column(image_size, patch_size, g.n_lookback, g.n_forecast);
    g.validate();
    return g;
}

ImagingGeometry ImagingGeometry::backcast(int lookback_len, int period, int image_size, int patch_size,
                                          int channels) {
    if (period < 1) throw GeometryMismatch("period must be >= 1");
    if (period > lookback_len) {
        throw PeriodTooLarge("period " + std::to_string(period) + " exceeds look-back length " +
                             std::to_string(lookback_len));
    }
    ImagingGeometry g;
    g.period = period;
    g.n_lookback = lookback_len / period;
    g.n_forecast = 0;
    g.image_size = image_size;
    g.patch_size = patch_size;
    g.channels = channels;
    g.boundary_col = image_size;
    g.validate();
    return g;
}

void ImagingGeometry::validate() const {
    if (period < 1 || n_lookback < 1) throw GeometryMismatch("need at least one look-back column");
    if (image_size < 1 || patch_size < 1 || channels < 1) {
        throw GeometryMismatch("image size, patch size and channels must be positive");
    }
    if (image_size % patch_size != 0) throw GeometryMismatch("S mod p != 0");
    if ((image_size / 2) % patch_size != 0) throw GeometryMismatch("(S/2) mod p != 0");
    if (boundary_col % patch_size != 0) throw GeometryMismatch("boundary column not patch aligned");
    if (n_forecast == 0) {
        if (boundary_col != image_size) throw GeometryMismatch("backcast layout requires b_col = S");
    } else if (boundary_col <= 0 || boundary_col >= image_size) {
        throw GeometryMismatch("boundary column must lie strictly inside the image");
    }
}

int boundary_column(int image_size, int patch_size, int n_lookback, int n_forecast) {
    const double raw = std::round(static_cast<double>(image_size) * n_lookback /
                                  static_cast<double>(n_lookback + n_forecast));
    int col = static_cast<int>(std::lround(raw / patch_size)) * patch_size;
    return std::clamp(col, patch_size, image_size - patch_size);
}

double& ImagedWindow::at(int c, int y, int x) {
    const int s = geometry.image_size;
    return pixels[(static_cast<std::size_t>(c) * s + y) * s + x];
}

double ImagedWindow::at(int c, int y, int x) const {
    const int s = geometry.image_size;
    return pixels[(static_cast<std::size_t>(c) * s + y) * s + x];
}

int detect_period(std::span<const double> values, int min_p, int max_p) {
    if (min_p < 2 || max_p < min_p) throw ConfigError("detect_period needs 2 <= min_p <= max_p");
    if (values.size() < 2 * static_cast<std::size_t>(max_p)) {
        throw ConfigError("detect_period needs at least 2*max_p values");
    }
    check_finite(values);

    const auto n = values.size();
    std::vector<double> input(values.begin(), values.end());
    std::vector<std::complex<double>> spectrum;
    {
        // kissfft twiddle caches are not thread-safe to build concurrently.
        static std::mutex planner_mutex;
        std::lock_guard lock(planner_mutex);
        Eigen::FFT<double> fft;
        fft.fwd(spectrum, input);
    }

    double sum_sq = 0.0;
    for (double v : values) sum_sq += v * v;
    const double rms = std::sqrt(sum_sq / static_cast<double>(n));

    double best_amp = 0.0;
    std::size_t best_bin = 0;
    for (std::size_t k = 1; k <= n / 2; ++k) {
        const double period = static_cast<double>(n) / static_cast<double>(k);
        if (period < min_p || period > max_p) continue;
        const double amp = 2.0 * std::abs(spectrum[k]) / static_cast<double>(n);
        if (amp > best_amp) {
            best_amp = amp;
            best_bin = k;
        }
    }
    if (best_bin == 0 || best_amp <= 1e-9 * rms) {
        throw NoDominantPeriod("no candidate frequency rises above the noise floor");
    }
    return static_cast<int>(std::lround(static_cast<double>(n) / static_cast<double>(best_bin)));
}

Grid segment_stack(std::span<const double> values, int period) {
    if (period < 1) throw GeometryMismatch("period must be >= 1");
    const auto p = static_cast<std::size_t>(period);
    if (p > values.size()) {
        throw PeriodTooLarge("period " + std::to_string(period) + " exceeds length " +
                             std::to_string(values.size()));
    }
    const std::size_t cols = values.size() / p;
    const std::size_t offset = values.size() - cols * p;
    Grid grid(p, cols);
    for (std::size_t j = 0; j < cols; ++j) {
        for (std::size_t r = 0; r < p; ++r) grid(r, j) = values[offset + j * p + r];
    }
    return grid;
}

std::vector<double> unstack(const Grid& grid) {
    std::vector<double> out(grid.rows * grid.cols);
    for (std::size_t j = 0; j < grid.cols; ++j) {
        for (std::size_t r = 0; r < grid.rows; ++r) out[j * grid.rows + r] = grid(r, j);
    }
    return out;
}

std::pair<std::vector<double>, NormStats> instance_normalize(std::span<const double> values) {
    if (values.empty()) throw ShapeMismatch("cannot normalize an empty sequence");
    NormStats stats;
    double sum = 0.0;
    for (double v : values) sum += v;
    stats.mean = sum / static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - stats.mean) * (v - stats.mean);
    stats.std = std::sqrt(ss / static_cast<double>(values.size()));

    std::vector<double> out(values.size());
    std::transform(values.begin(), values.end(), out.begin(), [&](double v) { return stats.normalize(v); });
    return {std::move(out), stats};
}

std::vector<double> denormalize(std::span<const double> values, const NormStats& stats) {
    std::vector<double> out(values.size());
    std::transform(values.begin(), values.end(), out.begin(), [&](double v) { return stats.denormalize(v); });
    return out;
}

Grid bilinear_resize(const Grid& grid, std::size_t h_out, std::size_t w_out) {
    if (grid.rows == 0 || grid.cols == 0 || h_out == 0 || w_out == 0) {
        throw ShapeMismatch("bilinear_resize needs non-empty input and output");
    }
    const auto col_taps = resize_taps(grid.cols, w_out);
    const auto row_taps = resize_taps(grid.rows, h_out);

    Grid horizontal(grid.rows, w_out);
    for (std::size_t r = 0; r < grid.rows; ++r) {
        for (std::size_t j = 0; j < w_out; ++j) {
            const Tap& t = col_taps[j];
            horizontal(r, j) = grid(r, t.lo) * (1.0 - t.frac) + grid(r, t.hi) * t.frac;
        }
    }
    Grid out(h_out, w_out);
    for (std::size_t i = 0; i < h_out; ++i) {
        const Tap& t = row_taps[i];
        for (std::size_t j = 0; j < w_out; ++j) {
            out(i, j) = horizontal(t.lo, j) * (1.0 - t.frac) + horizontal(t.hi, j) * t.frac;
        }
    }
    return out;
}

std::vector<double> resize_matrix(std::size_t n_in, std::size_t n_out) {
    if (n_in == 0 || n_out == 0) throw ShapeMismatch("resize_matrix needs positive sizes");
    std::vector<double> m(n_out * n_in, 0.0);
    for (std::size_t i = 0; i < n_out; ++i) {
        const Tap t = resize_tap(i, n_in, n_out);
        m[i * n_in + t.lo] += 1.0 - t.frac;
        m[i * n_in + t.hi] += t.frac;
    }
    return m;
}

ImagedWindow encode_window(std::span<const double> lookback, const ImagingGeometry& geometry) {
    geometry.validate();
    const int p = geometry.period;
    if (static_cast<int>(lookback.size()) < p) {
        throw PeriodTooLarge("period " + std::to_string(p) + " exceeds look-back length " +
                             std::to_string(lookback.size()));
    }
    if (static_cast<int>(lookback.size()) < 2 * p) {
        throw GeometryMismatch("look-back must hold at least two full periods");
    }
    if (static_cast<int>(lookback.size()) / p != geometry.n_lookback) {
        throw GeometryMismatch("geometry was built for a different look-back length");
    }
    check_finite(lookback);

    ImagedWindow img;
    img.geometry = geometry;
    img.retained_len = geometry.retained_len();
    const auto retained = lookback.subspan(lookback.size() - static_cast<std::size_t>(img.retained_len));
    auto [normalized, stats] = instance_normalize(retained);
    img.stats = stats;

    const Grid raw = segment_stack(normalized, p);
    const auto s = static_cast<std::size_t>(geometry.image_size);
    const auto b = static_cast<std::size_t>(geometry.boundary_col);
    const Grid resized = bilinear_resize(raw, s, b);

    img.pixels.assign(static_cast<std::size_t>(geometry.channels) * s * s, 0.0);
    for (int c = 0; c < geometry.channels; ++c) {
        for (std::size_t y = 0; y < s; ++y) {
            for (std::size_t x = 0; x < b; ++x) img.at(c, static_cast<int>(y), static_cast<int>(x)) = resized(y, x);
        }
    }
    return img;
}

ImagedWindow encode_window(const UnivariateWindow& window, const ImagingGeometry& geometry) {
    return encode_window(window.lookback, geometry);
}

ImagedWindow encode_with_target(const UnivariateWindow& window, const ImagingGeometry& geometry) {
    ImagedWindow img = encode_window(window.lookback, geometry);
    if (geometry.n_forecast == 0) return img;
    if (window.target.empty()) throw GeometryMismatch("window has no target to paint");
    check_finite(window.target);

    const int p = geometry.period;
    const std::size_t span_len = static_cast<std::size_t>(geometry.n_forecast) * p;
    std::vector<double> future(span_len);
    for (std::size_t i = 0; i < span_len; ++i) {
        const double v = i < window.target.size() ? window.target[i] : window.target.back();
        future[i] = img.stats.normalize(v);
    }
    const Grid raw = segment_stack(future, p);
    const auto s = static_cast<std::size_t>(geometry.image_size);
    const auto b = static_cast<std::size_t>(geometry.boundary_col);
    const Grid resized = bilinear_resize(raw, s, s - b);
    for (int c = 0; c < geometry.channels; ++c) {
        for (std::size_t y = 0; y < s; ++y) {
            for (std::size_t x = 0; x < s - b; ++x) {
                img.at(c, static_cast<int>(y), static_cast<int>(b + x)) = resized(y, x);
            }
        }
    }
    return img;
}

Grid crop_columns(std::span<const double> pixels, const ImagingGeometry& geometry, int col_begin, int col_end) {
    const auto s = static_cast<std::size_t>(geometry.image_size);
    if (pixels.size() != static_cast<std::size_t>(geometry.channels) * s * s) {
        throw ShapeMismatch("pixel buffer does not match geometry");
    }
    if (col_begin < 0 || col_end > geometry.image_size || col_begin >= col_end) {
        throw GeometryMismatch("invalid crop range");
    }
    Grid out(s, static_cast<std::size_t>(col_end - col_begin));
    for (std::size_t y = 0; y < s; ++y) {
        for (int x = col_begin; x < col_end; ++x) out(y, static_cast<std::size_t>(x - col_begin)) = pixels[y * s + x];
    }
    return out;
}

std::vector<double> decode_forecast(const ImagedWindow& image, int horizon) {
    const auto& g = image.geometry;
    if (g.n_forecast < 1) throw GeometryMismatch("image has no forecast region");
    if (horizon < 1 || horizon > g.n_forecast * g.period) {
        throw GeometryMismatch("horizon " + std::to_string(horizon) + " exceeds n_f*P = " +
                               std::to_string(g.n_forecast * g.period));
    }
    const Grid crop = crop_columns(image.pixels, g, g.boundary_col, g.image_size);
    const Grid raw = bilinear_resize(crop, static_cast<std::size_t>(g.period), static_cast<std::size_t>(g.n_forecast));
    auto seq = unstack(raw);
    seq.resize(static_cast<std::size_t>(horizon));
    return denormalize(seq, image.stats);
}

std::vector<double> decode_backcast(std::span<const double> pixels, const ImagingGeometry& geometry,
                                    const NormStats& stats) {
    const Grid crop = crop_columns(pixels, geometry, 0, geometry.boundary_col);
    const Grid raw = bilinear_resize(crop, static_cast<std::size_t>(geometry.period),
                                     static_cast<std::size_t>(geometry.n_lookback));
    return denormalize(unstack(raw), stats);
}

} // namespace dmmv::codec
