#include <benchmark/benchmark.h>

#include "kpcalib/beliefmap.hpp"
#include "kpcalib/kinematics.hpp"
#include "kpcalib/metrics.hpp"
#include "kpcalib/pnp.hpp"
#include "kpcalib/synth.hpp"

namespace {

using namespace kpcalib;

const CameraIntrinsics kK{615, 615, 320, 240, 640, 480};

const KinematicChain& Panda() {
  static const KinematicChain chain =
      LoadChainFile(std::string(KPCALIB_FIXTURE_DIR) + "/chains/panda.json");
  return chain;
}

void BM_ForwardKinematics(benchmark::State& state) {
  CounterRng rng(1);
  const JointConfig q = SampleJointConfig(Panda(), rng);
  for (auto _ : state) benchmark::DoNotOptimize(KeypointPositions(Panda(), q));
}
BENCHMARK(BM_ForwardKinematics);

std::vector<Correspondence> RandomCorrespondences(int n, std::uint64_t seed) {
  CounterRng rng(seed);
  const Transform pose = SampleCameraPose({}, rng);
  std::vector<Correspondence> out;
  while (static_cast<int>(out.size()) < n) {
    const Vec3 p(rng.Uniform(-0.4, 0.4), rng.Uniform(-0.4, 0.4), rng.Uniform(0.0, 0.8));
    if ((pose * p).z() < 0.1) continue;
    out.push_back({p, Project(kK, pose, p), 1.0});
  }
  return out;
}

void BM_Epnp(benchmark::State& state) {
  const auto corrs = RandomCorrespondences(static_cast<int>(state.range(0)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(SolveEpnp(corrs, kK));
}
BENCHMARK(BM_Epnp)->Arg(4)->Arg(7)->Arg(50)->Arg(500);

void BM_SolvePnpRefined(benchmark::State& state) {
  const auto corrs = RandomCorrespondences(static_cast<int>(state.range(0)), 3);
  for (auto _ : state) benchmark::DoNotOptimize(SolvePnp(corrs, kK));
}
BENCHMARK(BM_SolvePnpRefined)->Arg(7)->Arg(126);

void BM_ExtractPeak(benchmark::State& state) {
  const double scale = 1.0 / static_cast<double>(state.range(0));
  const BeliefMap map = RenderGroundTruth(640, 480, scale, {321.3, 200.7}, 2.0);
  for (auto _ : state) benchmark::DoNotOptimize(ExtractPeak(map, {}));
}
BENCHMARK(BM_ExtractPeak)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMicrosecond);

void BM_CombinationSweep(benchmark::State& state) {
  GenerateOptions opt;
  opt.n_frames = 18;
  opt.seed = 5;
  NoiseConfig noise;
  noise.pixel_sigma = 2.0;
  const Dataset d = GenerateDataset(Panda(), kK, {}, noise, opt);
  const auto frames = SweepFramesFromDataset(d);
  const int ms[] = {static_cast<int>(state.range(0))};
  SweepOptions so;
  so.n_cap = 200;
  for (auto _ : state) {
    benchmark::DoNotOptimize(CombinationSweep(frames, 18, SweepSolver::kDreamPnp, ms,
                                              d.frames.front().gt_cam_from_base, kK, so));
  }
}
BENCHMARK(BM_CombinationSweep)->Arg(1)->Arg(9)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
