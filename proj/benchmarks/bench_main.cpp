#include "dmmv/codec.hpp"
#include "dmmv/model.hpp"
#include "dmmv/numeric.hpp"
#include "dmmv/vision.hpp"

#include <benchmark/benchmark.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

using namespace dmmv;

namespace {

std::vector<double> sine(std::size_t n, int period) {
    std::vector<double> x(n);
    for (std::size_t t = 0; t < n; ++t) x[t] = std::sin(2 * std::numbers::pi * static_cast<double>(t) / period);
    return x;
}

void BM_EncodeWindow(benchmark::State& state) {
    const auto size = static_cast<int>(state.range(0));
    const auto x = sine(336, 24);
    const auto geo = codec::ImagingGeometry::forecast(336, 96, 24, size, 8);
    for (auto _ : state) benchmark::DoNotOptimize(codec::encode_window(x, geo));
}
BENCHMARK(BM_EncodeWindow)->Arg(32)->Arg(64)->Arg(224);

void BM_DecodeForecast(benchmark::State& state) {
    const auto size = static_cast<int>(state.range(0));
    const auto geo = codec::ImagingGeometry::forecast(336, 96, 24, size, 8);
    const auto img = codec::encode_window(sine(336, 24), geo);
    for (auto _ : state) benchmark::DoNotOptimize(codec::decode_forecast(img, 96));
}
BENCHMARK(BM_DecodeForecast)->Arg(32)->Arg(64)->Arg(224);

vision::MaeConfig mae_config(int image_size) {
    vision::MaeConfig c;
    c.image_size = image_size;
    c.patch_size = 8;
    c.enc_dim = 32;
    c.enc_depth = 2;
    c.dec_dim = 32;
    c.dec_depth = 1;
    return c;
}

void BM_MaeForward(benchmark::State& state) {
    const auto size = static_cast<int>(state.range(0));
    std::mt19937_64 rng(0);
    ad::ParameterStore store;
    vision::MaskedAutoencoder mae(mae_config(size), store, rng);
    const auto geo = codec::ImagingGeometry::forecast(336, 96, 24, size, 8);
    const auto img = codec::encode_window(sine(336, 24), geo);
    const ad::Tensor pixels({1, static_cast<std::size_t>(size), static_cast<std::size_t>(size)}, img.pixels);
    const auto mask = vision::forecast_mask(geo);
    for (auto _ : state) {
        ad::NoGradGuard guard;
        benchmark::DoNotOptimize(mae.reconstruct(pixels, mask));
    }
}
BENCHMARK(BM_MaeForward)->Arg(32)->Arg(64);

void BM_MaeForwardBackward(benchmark::State& state) {
    const auto size = static_cast<int>(state.range(0));
    std::mt19937_64 rng(0);
    ad::ParameterStore store;
    vision::MaskedAutoencoder mae(mae_config(size), store, rng);
    const auto geo = codec::ImagingGeometry::forecast(336, 96, 24, size, 8);
    const auto img = codec::encode_window(sine(336, 24), geo);
    const ad::Tensor pixels({1, static_cast<std::size_t>(size), static_cast<std::size_t>(size)}, img.pixels);
    const auto target = ad::constant(pixels);
    const auto mask = vision::forecast_mask(geo);
    for (auto _ : state) {
        store.zero_grad();
        ad::backward(ad::mse(mae.reconstruct(pixels, mask), target));
    }
}
BENCHMARK(BM_MaeForwardBackward)->Arg(32)->Arg(64);

void BM_LinearForecaster(benchmark::State& state) {
    std::mt19937_64 rng(0);
    ad::ParameterStore store;
    numeric::LinearForecaster f(store, 336, 96, rng);
    const auto x = ad::constant(ad::Tensor::row(sine(336, 24)));
    const auto y = ad::constant(ad::Tensor::row(sine(96, 24)));
    for (auto _ : state) {
        store.zero_grad();
        ad::backward(ad::mse(f.forecast(x), y));
    }
}
BENCHMARK(BM_LinearForecaster);

void BM_DmmvPredict(benchmark::State& state) {
    model::ModelConfig c;
    c.mae = mae_config(32);
    model::DmmvModel m(c);
    const auto x = sine(336, 24);
    for (auto _ : state) benchmark::DoNotOptimize(m.predict(x));
}
BENCHMARK(BM_DmmvPredict);

} // namespace
BENCHMARK_MAIN();
