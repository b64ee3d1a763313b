// Serial reference vs OpenMP kernels on the shapes the segmenter runs.
// Usage: bench_kernels [reps] [threads]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>
#include <vector>

#include "ara/kernels.hpp"
#include "ara/rng.hpp"

namespace k = ara::kernels;

namespace {

std::vector<float> random_vec(std::size_t n, ara::Rng& rng) {
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.uniform(-1.0, 1.0));
  return v;
}

double median_ms(int reps, const std::function<void()>& fn) {
  fn();  // warm-up
  std::vector<double> t;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    t.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  std::sort(t.begin(), t.end());
  return t[t.size() / 2];
}

double max_diff(const std::vector<float>& a, const std::vector<float>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, double(std::abs(a[i] - b[i])));
  return m;
}

void report(const std::string& name, double serial, double parallel, double diff) {
  std::printf("%-34s serial %9.3f ms  parallel %9.3f ms  speedup %5.2fx  max|diff| %.1e\n", name.c_str(), serial,
              parallel, serial / parallel, diff);
}

void bench_conv(const char* name, k::ConvGeometry g, int reps, ara::Rng& rng) {
  const auto in = random_vec(g.batch * g.in_channels * g.in_h * g.in_w, rng);
  const auto w = random_vec(g.out_channels * g.in_channels * g.kernel * g.kernel, rng);
  const auto b = random_vec(g.out_channels, rng);
  const std::size_t out_n = g.batch * g.out_channels * g.out_h * g.out_w;
  std::vector<float> os(out_n), op(out_n);
  const double ts = median_ms(reps, [&] { k::serial::conv2d_forward(g, in, w, b, os); });
  const double tp = median_ms(reps, [&] { k::parallel::conv2d_forward(g, in, w, b, op); });
  report(std::string(name) + " fwd", ts, tp, max_diff(os, op));

  const auto go = random_vec(out_n, rng);
  std::vector<float> gis(in.size()), gws(w.size()), gbs(b.size());
  std::vector<float> gip(in.size()), gwp(w.size()), gbp(b.size());
  auto zero = [](std::vector<float>& v) { std::fill(v.begin(), v.end(), 0.0f); };
  const double bs = median_ms(reps, [&] {
    zero(gis), zero(gws), zero(gbs);
    k::serial::conv2d_backward(g, in, w, go, gis, gws, gbs);
  });
  const double bp = median_ms(reps, [&] {
    zero(gip), zero(gwp), zero(gbp);
    k::parallel::conv2d_backward(g, in, w, go, gip, gwp, gbp);
  });
  report(std::string(name) + " bwd", bs, bp, std::max(max_diff(gis, gip), max_diff(gws, gwp)));
}

void bench_matmul(const char* name, std::size_t m, std::size_t kk, std::size_t n, int reps, ara::Rng& rng) {
  const auto a = random_vec(m * kk, rng), b = random_vec(kk * n, rng);
  std::vector<float> os(m * n), op(m * n);
  const double ts = median_ms(reps, [&] { k::serial::matmul(m, kk, n, a, b, os); });
  const double tp = median_ms(reps, [&] { k::parallel::matmul(m, kk, n, a, b, op); });
  report(std::string(name) + " fwd", ts, tp, max_diff(os, op));

  const auto go = random_vec(m * n, rng);
  std::vector<float> gas(a.size()), gbs(b.size()), gap(a.size()), gbp(b.size());
  auto zero = [](std::vector<float>& v) { std::fill(v.begin(), v.end(), 0.0f); };
  const double bs = median_ms(reps, [&] {
    zero(gas), zero(gbs);
    k::serial::matmul_backward(m, kk, n, a, b, go, gas, gbs);
  });
  const double bp = median_ms(reps, [&] {
    zero(gap), zero(gbp);
    k::parallel::matmul_backward(m, kk, n, a, b, go, gap, gbp);
  });
  report(std::string(name) + " bwd", bs, bp, std::max(max_diff(gas, gap), max_diff(gbs, gbp)));
}

}  // namespace

int main(int argc, char** argv) {
  const int reps = argc > 1 ? std::max(1, std::atoi(argv[1])) : 20;
  if (argc > 2) k::set_threads(std::atoi(argv[2]));
  std::printf("threads %d, median of %d reps\n", k::max_threads(), reps);
  ara::Rng rng(2024);
  // 64x64 frame through the two encoder stages and the decoder head.
  bench_conv("conv 4->16 k4s2 64x64", {1, 4, 64, 64, 16, 4, 2, 1, 32, 32}, reps, rng);
  bench_conv("conv 16->16 k4s2 32x32", {1, 16, 32, 32, 16, 4, 2, 1, 16, 16}, reps, rng);
  bench_conv("conv 25->16 k3s1 16x16", {1, 25, 16, 16, 16, 3, 1, 1, 16, 16}, reps, rng);
  // Attention over five memory frames: affinity K^T Q and readout V A.
  bench_matmul("affinity 1280x16x256", 1280, 16, 256, reps, rng);
  bench_matmul("readout 9x1280x256", 9, 1280, 256, reps, rng);
  return 0;
}
