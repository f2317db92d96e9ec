#pragma once

// Period-based imaging of univariate windows: a look-back window is cut into
// period-length columns, z-scored, resized to a square image and later
// recovered from (partially) reconstructed pixels.

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace dmmv::codec {

/// One variate's look-back values (oldest first) and, when known, the values
/// of the forecast horizon that follows them.
struct UnivariateWindow {
    std::vector<double> lookback;
    std::vector<double> target;
    int variate_id = 0;
};

/// Dense row-major 2-D grid of reals.
struct Grid {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;

    Grid() = default;
    Grid(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), values(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

struct ImagingGeometry {
    int period = 1;        // P, rows of the raw grid
    int n_lookback = 1;    // floor(T / P)
    int n_forecast = 0;    // ceil(H / P), zero for the backcast layout
    int image_size = 64;   // S
    int patch_size = 8;    // p
    int channels = 1;      // C
    int boundary_col = 64; // first pixel column of the forecast region

    /// Layout used for forecasting: look-back columns on the left, a
    /// patch-aligned masked region on the right for the horizon.
    static ImagingGeometry forecast(int lookback_len, int horizon, int period, int image_size,
                                    int patch_size, int channels = 1);

    /// Layout used for backcasting: the whole square image is look-back.
    static ImagingGeometry backcast(int lookback_len, int period, int image_size, int patch_size,
                                    int channels = 1);

    int retained_len() const { return n_lookback * period; }
    bool is_backcast() const { return boundary_col == image_size && n_forecast == 0; }
    int patch_grid() const { return image_size / patch_size; }

    /// Throws GeometryMismatch when an invariant does not hold.
    void validate() const;

    bool operator==(const ImagingGeometry&) const = default;
};

/// Pixel column where the forecast region starts: S*n_lb/(n_lb+n_f) rounded,
/// snapped to the nearest multiple of p and clamped to [p, S-p].
int boundary_column(int image_size, int patch_size, int n_lookback, int n_forecast);

struct NormStats {
    double mean = 0.0;
    double std = 0.0;
    double eps = 1e-8;

    double scale() const { return std + eps; }
    double normalize(double x) const { return (x - mean) / scale(); }
    double denormalize(double z) const { return z * scale() + mean; }
};

/// Pixels are stored [C][S][S] row-major; row = position inside the period,
/// column = period index.
struct ImagedWindow {
    std::vector<double> pixels;
    ImagingGeometry geometry;
    NormStats stats;
    int retained_len = 0;

    double& at(int c, int y, int x);
    double at(int c, int y, int x) const;
};

/// Dominant period from the amplitude spectrum, restricted to bins whose
/// period falls in [min_p, max_p].
int detect_period(std::span<const double> values, int min_p, int max_p);

/// Stacks the most recent floor(T/P)*P values into a P x floor(T/P) grid,
/// column j holding one period. The oldest T mod P values are dropped.
Grid segment_stack(std::span<const double> values, int period);

/// Inverse of segment_stack: reads columns top to bottom, left to right.
std::vector<double> unstack(const Grid& grid);

std::pair<std::vector<double>, NormStats> instance_normalize(std::span<const double> values);
std::vector<double> denormalize(std::span<const double> values, const NormStats& stats);

/// Bilinear resize with half-pixel centres and edge clamping. Equal sizes give
/// bitwise-identical output.
Grid bilinear_resize(const Grid& grid, std::size_t h_out, std::size_t w_out);

/// Row-major [n_out][n_in] weights of the 1-D interpolation used by
/// bilinear_resize, so that resize(G) = R_h * G * R_w^T.
std::vector<double> resize_matrix(std::size_t n_in, std::size_t n_out);

ImagedWindow encode_window(std::span<const double> lookback, const ImagingGeometry& geometry);
ImagedWindow encode_window(const UnivariateWindow& window, const ImagingGeometry& geometry);

/// Like encode_window but also paints the known horizon into the forecast
/// region (normalized with the look-back statistics). Used as a
/// reconstruction target.
ImagedWindow encode_with_target(const UnivariateWindow& window, const ImagingGeometry& geometry);

/// Channel-0 pixels of columns [col_begin, col_end).
Grid crop_columns(std::span<const double> pixels, const ImagingGeometry& geometry, int col_begin,
                  int col_end);

/// Crop of the forecast columns -> resize to P x n_f -> unstack -> first H
/// values -> denormalize.
std::vector<double> decode_forecast(const ImagedWindow& image, int horizon);

std::vector<double> decode_backcast(std::span<const double> pixels, const ImagingGeometry& geometry,
                                    const NormStats& stats);

} // namespace dmmv::codec
