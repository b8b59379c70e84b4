// OpenMP kernels against their serial references on 640x480 frames.

#include "ekfslam/reference.hpp"
#include "ekfslam/vision.hpp"
#include "ekfslam/world.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace ekfslam;

namespace {

GrayImage noise_image(int w = 640, int h = 480) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> d(0, 255);
  GrayImage img(w, h);
  for (auto& v : img.data) v = static_cast<std::uint8_t>(d(rng));
  return img;
}

const WorldModel& world() {
  static const WorldModel w = make_world({}, 3);
  return w;
}

Frame room_camera() {
  // Centre of the room looking along +x, image y down.
  Mat3 r;
  r << 0, 0, 1, -1, 0, 0, 0, -1, 0;
  const Eigen::Quaterniond q(r);
  return {Vec3(0, 0, 1.5), Quaternion{q.w(), q.x(), q.y(), q.z()}};
}

void BM_Integral(benchmark::State& st) {
  const GrayImage img = noise_image();
  for (auto _ : st) benchmark::DoNotOptimize(build_integral(img));
}

void BM_IntegralReference(benchmark::State& st) {
  const GrayImage img = noise_image();
  for (auto _ : st) benchmark::DoNotOptimize(reference::build_integral(img));
}

void BM_Harris(benchmark::State& st) {
  const GrayImage img = noise_image();
  const Roi roi{0, 0, 128, 120};
  for (auto _ : st) benchmark::DoNotOptimize(harris_best(img, harris_clip(img, roi, {}), {}));
}

void BM_HarrisReference(benchmark::State& st) {
  const GrayImage img = noise_image();
  const HarrisParams p;
  const Roi roi = harris_clip(img, {0, 0, 128, 120}, p);
  for (auto _ : st) benchmark::DoNotOptimize(reference::harris_best(img, roi, p));
}

void BM_Search(benchmark::State& st) {
  const GrayImage img = noise_image();
  const SearchImage si(img);
  const GrayImage templ = crop(img, 315, 235, 11, 11);
  const int r = static_cast<int>(st.range(0));
  for (auto _ : st) benchmark::DoNotOptimize(search_match(si, templ, {320 - r, 320 + r, 240 - r, 240 + r}, 0.85));
}

void BM_SearchReference(benchmark::State& st) {
  const GrayImage img = noise_image();
  const GrayImage templ = crop(img, 315, 235, 11, 11);
  const int r = static_cast<int>(st.range(0));
  for (auto _ : st)
    benchmark::DoNotOptimize(reference::exhaustive_search(img, templ, {320 - r, 320 + r, 240 - r, 240 + r}, 0.85));
}

void BM_Render(benchmark::State& st) {
  const Frame cam = room_camera();
  for (auto _ : st) benchmark::DoNotOptimize(render_frame(world(), cam, PinholeIntrinsics{}, {}));
}

void BM_RenderSerial(benchmark::State& st) {
  const Frame cam = room_camera();
  for (auto _ : st) benchmark::DoNotOptimize(render_frame_serial(world(), cam, PinholeIntrinsics{}, {}));
}

}  // namespace

BENCHMARK(BM_Integral)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_IntegralReference)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Harris)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_HarrisReference)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Search)->Arg(5)->Arg(15)->Arg(40)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_SearchReference)->Arg(5)->Arg(15)->Arg(40)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Render)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RenderSerial)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
