#include "kpcalib/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include "kpcalib/error.hpp"
#include "kpcalib/parallel.hpp"
#include "kpcalib/rng.hpp"

namespace kpcalib {

Curve CurveAndAuc(std::span<const double> errors,
                  std::span<const double> thresholds, double auc_max,
                  int auc_intervals) {
  if (errors.empty()) {
    throw Error(ErrorKind::kEmptyEvaluation, "no samples to evaluate");
  }
  if (!(auc_max > 0.0) || auc_intervals < 1) {
    throw Error(ErrorKind::kValidationError,
                "AUC range must be > 0 with at least one interval");
  }
  if (!std::is_sorted(thresholds.begin(), thresholds.end())) {
    throw Error(ErrorKind::kValidationError, "thresholds must be ascending");
  }
  std::vector<double> sorted(errors.begin(), errors.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  auto fraction_at = [&](double t) {
    return static_cast<double>(std::upper_bound(sorted.begin(), sorted.end(), t) -
                               sorted.begin()) / n;
  };

  Curve c;
  c.thresholds.assign(thresholds.begin(), thresholds.end());
  c.n_samples = sorted.size();
  c.auc_max = auc_max;
  c.auc_intervals = auc_intervals;
  for (double t : thresholds) c.fractions.push_back(fraction_at(t));

  double area = 0.0;
  double prev = fraction_at(0.0);
  for (int i = 1; i <= auc_intervals; ++i) {
    const double cur = fraction_at(auc_max * i / auc_intervals);
    area += 0.5 * (prev + cur);
    prev = cur;
  }
  c.auc = area / auc_intervals;
  return c;
}

std::vector<double> PckErrors(std::span<const PckFrame> frames) {
  std::vector<double> errors;
  for (const PckFrame& f : frames) {
    if (f.in_frustum.size() != f.ground_truth.size()) {
      throw Error(ErrorKind::kDimensionMismatch,
                  "frustum mask length differs from ground truth");
    }
    std::map<std::string, Vec2> det;
    for (const NamedPixel& d : f.detections) det[d.name] = d.pixel;
    for (size_t i = 0; i < f.ground_truth.size(); ++i) {
      if (!f.in_frustum[i]) continue;
      const auto it = det.find(f.ground_truth[i].name);
      errors.push_back(it == det.end()
                           ? std::numeric_limits<double>::infinity()
                           : (it->second - f.ground_truth[i].pixel).norm());
    }
  }
  return errors;
}

Curve Pck(std::span<const PckFrame> frames, std::span<const double> thresholds_px,
          double auc_max_px, int auc_intervals) {
  const std::vector<double> errors = PckErrors(frames);
  if (errors.empty()) {
    throw Error(ErrorKind::kEmptyEvaluation,
                "no in-frustum keypoints to evaluate PCK on");
  }
  return CurveAndAuc(errors, thresholds_px, auc_max_px, auc_intervals);
}

double AddMm(const Transform& est, const Transform& gt,
             std::span<const Vec3> points) {
  if (points.empty()) {
    throw Error(ErrorKind::kValidationError, "ADD needs at least one keypoint");
  }
  double sum = 0.0;
  for (const Vec3& p : points) sum += (est * p - gt * p).norm();
  return 1000.0 * sum / static_cast<double>(points.size());
}

double AddMm(const Transform& est, const Transform& gt,
             std::span<const NamedPoint> keypoints3d) {
  std::vector<Vec3> pts;
  pts.reserve(keypoints3d.size());
  for (const NamedPoint& p : keypoints3d) pts.push_back(p.position);
  return AddMm(est, gt, pts);
}

std::string_view SweepSolverName(SweepSolver s) {
  return s == SweepSolver::kDreamPnp ? "dream" : "hec";
}

int MinFramesFor(SweepSolver s) { return s == SweepSolver::kDreamPnp ? 1 : 3; }

std::uint64_t BinomialSaturating(int n, int k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  // Multiplicative formula in 128-bit; each partial product is itself a
  // binomial coefficient, so the division is exact.
  __extension__ using u128 = unsigned __int128;
  u128 result = 1;
  for (int i = 1; i <= k; ++i) {
    result = result * static_cast<unsigned>(n - k + i) / static_cast<unsigned>(i);
    if (result > UINT64_MAX) return UINT64_MAX;
  }
  return static_cast<std::uint64_t>(result);
}

std::vector<std::vector<int>> SelectCombinations(int big_m, int m,
                                                 std::size_t n_cap,
                                                 std::uint64_t seed) {
  if (m < 0 || m > big_m) {
    throw Error(ErrorKind::kValidationError, "combination size out of range");
  }
  std::vector<std::vector<int>> out;
  const std::uint64_t total = BinomialSaturating(big_m, m);
  if (total <= n_cap) {
    std::vector<int> comb(static_cast<size_t>(m));
    std::iota(comb.begin(), comb.end(), 0);
    while (true) {
      out.push_back(comb);
      int i = m - 1;
      while (i >= 0 && comb[i] == big_m - m + i) --i;
      if (i < 0) break;
      ++comb[i];
      for (int j = i + 1; j < m; ++j) comb[j] = comb[j - 1] + 1;
    }
    return out;
  }

  CounterRng rng(seed, static_cast<std::uint64_t>(m));
  std::set<std::vector<int>> chosen;
  std::vector<int> pool(static_cast<size_t>(big_m));
  while (chosen.size() < n_cap) {
    std::iota(pool.begin(), pool.end(), 0);
    for (int i = 0; i < m; ++i) {
      const auto j = i + static_cast<int>(rng.UniformIndex(static_cast<std::uint64_t>(big_m - i)));
      std::swap(pool[i], pool[j]);
    }
    std::vector<int> comb(pool.begin(), pool.begin() + m);
    std::sort(comb.begin(), comb.end());
    chosen.insert(std::move(comb));
  }
  out.assign(chosen.begin(), chosen.end());
  return out;
}

SweepFrame SweepFrameFromRecord(const FrameRecord& record) {
  SweepFrame f;
  f.observation.keypoints3d = record.keypoints3d;
  for (const NamedPixel& d : record.detections) {
    f.observation.detections.push_back({d.name, d.pixel, 1.0});
  }
  f.handeye = record.handeye;
  return f;
}

std::vector<SweepFrame> SweepFramesFromDataset(const Dataset& dataset) {
  std::vector<SweepFrame> out;
  out.reserve(dataset.frames.size());
  for (const FrameRecord& r : dataset.frames) out.push_back(SweepFrameFromRecord(r));
  return out;
}

namespace {

double Median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

SweepResult CombinationSweep(std::span<const SweepFrame> frames, int big_m,
                             SweepSolver solver, std::span<const int> m_values,
                             const Transform& gt_cam_from_base,
                             const CameraIntrinsics& k,
                             const SweepOptions& options) {
  if (big_m < 1 || big_m > static_cast<int>(frames.size())) {
    throw Error(ErrorKind::kValidationError,
                "sweep M must be between 1 and the number of frames");
  }
  for (int m : m_values) {
    if (m < MinFramesFor(solver) || m > big_m) {
      throw Error(ErrorKind::kSolverUnavailableForM,
                  std::string(SweepSolverName(solver)) + " cannot run on m=" +
                      std::to_string(m) + " of M=" + std::to_string(big_m) +
                      " frames");
    }
  }
  if (solver == SweepSolver::kHandEye) {
    for (int i = 0; i < big_m; ++i) {
      if (!frames[i].handeye) {
        throw Error(ErrorKind::kValidationError,
                    "hand-eye sweep needs a marker sample on every frame");
      }
    }
  }

  auto evaluate = [&](const Transform& est) {
    double sum = 0.0;
    for (int i = 0; i < big_m; ++i) {
      sum += AddMm(est, gt_cam_from_base, frames[i].observation.keypoints3d);
    }
    return sum / big_m;
  };

  SweepResult result;
  result.solver = solver;
  result.big_m = big_m;
  result.n_cap = options.n_cap;
  result.seed = options.seed;
  for (int m : m_values) {
    const auto combos = SelectCombinations(big_m, m, options.n_cap, options.seed);
    std::vector<double> add(combos.size(), std::numeric_limits<double>::quiet_NaN());
    ParallelFor(combos.size(), options.threads, [&](size_t c) {
      try {
        Transform est;
        if (solver == SweepSolver::kDreamPnp) {
          std::vector<FrameObservation> obs;
          for (int i : combos[c]) obs.push_back(frames[i].observation);
          est = SolveMultiFrame(obs, k, options.pnp).cam_from_robot;
        } else {
          std::vector<HandEyeSample> samples;
          for (int i : combos[c]) samples.push_back(*frames[i].handeye);
          est = SolveEyeOnBase(samples, options.handeye).cam_from_base;
        }
        add[c] = evaluate(est);
      } catch (const Error&) {
        // Left as NaN and counted as a failed combination.
      }
    });

    SweepRow row;
    row.m = m;
    row.n_combinations_total = BinomialSaturating(big_m, m);
    row.n_combinations_used = combos.size();
    std::vector<double> ok;
    for (double v : add) {
      if (std::isnan(v)) {
        ++row.n_failed;
      } else {
        ok.push_back(v);
      }
    }
    row.errors_mm = ok;
    if (!ok.empty()) {
      row.mean = std::accumulate(ok.begin(), ok.end(), 0.0) / static_cast<double>(ok.size());
      row.median = Median(ok);
      row.min = *std::min_element(ok.begin(), ok.end());
      row.max = *std::max_element(ok.begin(), ok.end());
    } else {
      row.mean = row.median = row.min = row.max =
          std::numeric_limits<double>::quiet_NaN();
    }
    result.rows.push_back(row);
  }
  return result;
}

std::vector<WorkspaceStats> WorkspaceErrorReport(
    std::span<const NamedTransform> estimates,
    std::span<const Vec3> targets_cam, std::span<const Vec3> reference_base) {
  if (targets_cam.size() != reference_base.size()) {
    throw Error(ErrorKind::kDimensionMismatch,
                "target and reference point lists differ in length");
  }
  if (targets_cam.empty()) {
    throw Error(ErrorKind::kEmptyEvaluation, "no workspace points");
  }
  std::vector<WorkspaceStats> out;
  for (const NamedTransform& e : estimates) {
    const Transform base_from_cam = e.cam_from_base.inverse();
    std::vector<double> err(targets_cam.size());
    for (size_t i = 0; i < targets_cam.size(); ++i) {
      err[i] = 1000.0 * (base_from_cam * targets_cam[i] - reference_base[i]).norm();
    }
    WorkspaceStats s;
    s.method = e.name;
    s.min_mm = *std::min_element(err.begin(), err.end());
    s.max_mm = *std::max_element(err.begin(), err.end());
    const double n = static_cast<double>(err.size());
    s.mean_mm = std::accumulate(err.begin(), err.end(), 0.0) / n;
    double var = 0.0;
    for (double v : err) var += (v - s.mean_mm) * (v - s.mean_mm);
    s.std_mm = std::sqrt(var / n);
    out.push_back(s);
  }
  return out;
}

}  // namespace kpcalib
