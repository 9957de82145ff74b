#include "commands.hpp"

#include <algorithm>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>

#include "kpcalib/beliefmap.hpp"
#include "kpcalib/handeye.hpp"
#include "kpcalib/kinematics.hpp"
#include "kpcalib/metrics.hpp"
#include "kpcalib/parallel.hpp"
#include "kpcalib/pnp.hpp"
#include "kpcalib/serialization.hpp"
#include "kpcalib/synth.hpp"
#include "run_context.hpp"

namespace kpcalib::cli {
namespace fs = std::filesystem;

namespace {

KinematicChain ReadChain(RunContext& ctx, const std::string& path) {
  return LoadChain(ctx.ReadInput(path));
}

CameraIntrinsics ReadIntrinsics(RunContext& ctx, const std::string& path) {
  CameraIntrinsics k = IntrinsicsFromJson(ctx.ReadJsonInput(path));
  k.Validate();
  return k;
}

std::string FrameFileName(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%06d.bmap", index);
  return buf;
}

// Frames come either from a dataset document or a bare {"frames": [...]}.
std::vector<FrameRecord> ReadFrames(RunContext& ctx, const std::string& path) {
  const Json j = ctx.ReadJsonInput(path);
  const Json* arr = &j;
  if (j.is_object()) {
    if (!j.contains("frames")) throw Error(ErrorKind::kParseError, path + ": missing field 'frames'");
    arr = &j["frames"];
  }
  if (!arr->is_array()) throw Error(ErrorKind::kParseError, path + ": 'frames' must be an array");
  std::vector<FrameRecord> frames;
  int next_index = 0;
  for (const Json& f : *arr) {
    FrameRecord r = FrameRecordFromJson(f);
    if (!f.contains("index")) r.index = next_index;
    next_index = r.index + 1;
    frames.push_back(std::move(r));
  }
  return frames;
}

Dataset ReadDataset(RunContext& ctx, const std::string& path) {
  return DatasetFromJson(ctx.ReadJsonInput(path));
}

// Runs fn over [0, n) and rethrows the failure with the lowest index, so the
// reported error does not depend on scheduling.
template <typename Fn>
void ParallelForOrdered(std::size_t n, int threads, Fn&& fn) {
  std::vector<std::exception_ptr> errors(n);
  ParallelFor(n, threads, [&](std::size_t i) {
    try {
      fn(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  });
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

Transform StaticGroundTruth(const Dataset& d) {
  if (d.frames.empty()) throw Error(ErrorKind::kEmptyEvaluation, "dataset has no frames");
  if (d.header.camera_mode != CameraMode::kStatic) {
    throw Error(ErrorKind::kValidationError,
                "this command needs a static-camera dataset");
  }
  return d.frames.front().gt_cam_from_base;
}

Json CurveSummary(const Curve& c, const char* unit) {
  Json j;
  j[std::string("thresholds_") + unit] = c.thresholds;
  j["fractions"] = c.fractions;
  j["auc"] = c.auc;
  j[std::string("auc_max_") + unit] = c.auc_max;
  j["n_samples"] = c.n_samples;
  return j;
}

std::vector<double> DenseThresholds(double max) {
  std::vector<double> t;
  for (int i = 0; i <= 100; ++i) t.push_back(max * i / 100.0);
  return t;
}

Transform PoseFromDocument(const Json& j) {
  if (j.contains("solution")) return TransformFromJson(j["solution"]);
  return TransformFromJson(j);
}

std::vector<HandEyeSample> SamplesFromDataset(const Dataset& d) {
  std::vector<HandEyeSample> s;
  for (const FrameRecord& f : d.frames) {
    if (f.handeye) s.push_back(*f.handeye);
  }
  return s;
}

}  // namespace

std::vector<int> ParseMRange(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string part;
  auto to_int = [&](const std::string& s) {
    try {
      size_t used = 0;
      const int v = std::stoi(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw Error(ErrorKind::kParseError, "bad m-range entry '" + s + "'");
    }
  };
  while (std::getline(ss, part, ',')) {
    const auto dots = part.find("..");
    if (dots == std::string::npos) {
      out.push_back(to_int(part));
      continue;
    }
    const int lo = to_int(part.substr(0, dots));
    const int hi = to_int(part.substr(dots + 2));
    if (hi < lo) throw Error(ErrorKind::kParseError, "empty m-range '" + part + "'");
    for (int m = lo; m <= hi; ++m) out.push_back(m);
  }
  if (out.empty()) throw Error(ErrorKind::kParseError, "empty m-range");
  return out;
}

// --- calibrate --------------------------------------------------------------

int RunCalibrate(const CalibrateArgs& a, int threads) {
  RunContext ctx("calibrate");
  ctx.config() = {{"chain", a.chain},
                  {"intrinsics", a.intrinsics},
                  {"frames", a.frames},
                  {"belief_maps", a.belief_maps},
                  {"multiframe", a.multiframe},
                  {"refine", a.refine},
                  {"confidence_weighting", a.confidence_weighting},
                  {"robust", a.robust},
                  {"peak_threshold", a.peak_threshold},
                  {"threads", threads}};
  const KinematicChain chain = ReadChain(ctx, a.chain);
  const CameraIntrinsics k = ReadIntrinsics(ctx, a.intrinsics);
  const std::vector<FrameRecord> records = ReadFrames(ctx, a.frames);
  if (records.empty()) throw Error(ErrorKind::kInsufficientPoints, "no frames to calibrate");

  std::vector<FrameObservation> obs(records.size());
  for (size_t i = 0; i < records.size(); ++i) {
    const FrameRecord& r = records[i];
    obs[i].keypoints3d = KeypointPositions(chain, r.joint_config);
    if (a.belief_maps.empty()) {
      for (const NamedPixel& p : r.detections) obs[i].detections.push_back({p.name, p.pixel, 1.0});
      continue;
    }
    const std::string name =
        r.belief_maps ? fs::path(*r.belief_maps).filename().string() : FrameFileName(r.index);
    const std::string path = (fs::path(a.belief_maps) / name).string();
    ctx.RecordInput(path);
    ctx.RecordInput(path + ".json");
    const BeliefMapStack stack = ReadBeliefMapStack(path);
    if (!stack.maps.empty()) {
      const auto [w, h] = MapDimensions(k.width, k.height, stack.scale);
      if (stack.maps.front().width() != w || stack.maps.front().height() != h) {
        throw Error(ErrorKind::kValidationError,
                    path + ": belief map size does not match the intrinsics");
      }
    }
    PeakExtractConfig cfg;
    cfg.peak_threshold = a.peak_threshold;
    for (const auto& d : ExtractAll(stack, cfg)) {
      if (d) obs[i].detections.push_back(*d);
    }
  }

  PnpConfig cfg;
  cfg.refine = a.refine;
  cfg.confidence_weighting = a.confidence_weighting;
  cfg.refine_options.robust = a.robust;

  Json out;
  if (a.multiframe) {
    const PnpSolution s = SolveMultiFrame(obs, k, cfg);
    out = {{"mode", "multi-frame"}, {"solution", ToJson(s)}};
  } else {
    std::vector<PnpSolution> sols(obs.size());
    ParallelForOrdered(obs.size(), threads, [&](std::size_t i) {
      try {
        sols[i] = SolveFrame(obs[i], k, cfg);
        sols[i].frames_used = 1;
      } catch (const Error& e) {
        throw Error(e.kind(), "frame " + std::to_string(records[i].index) + ": " + e.what());
      }
    });
    Json frames = Json::array();
    for (size_t i = 0; i < sols.size(); ++i) {
      frames.push_back({{"index", records[i].index}, {"solution", ToJson(sols[i])}});
    }
    out = {{"mode", "single-frame"}, {"frames", frames}};
  }
  WriteJsonFile(a.out, out);
  ctx.WriteManifest(a.out);
  return 0;
}

// --- extract ------------------------------------------------------------------

int RunExtract(const ExtractArgs& a) {
  RunContext ctx("extract");
  ctx.config() = {{"input", a.input},
                  {"peak_threshold", a.peak_threshold},
                  {"smooth_sigma", a.smooth_sigma},
                  {"window_radius", a.window_radius}};
  ctx.RecordInput(a.input);
  ctx.RecordInput(a.input + ".json");
  const BeliefMapStack stack = ReadBeliefMapStack(a.input);
  PeakExtractConfig cfg;
  cfg.peak_threshold = a.peak_threshold;
  cfg.smooth_sigma = a.smooth_sigma;
  cfg.window_radius = a.window_radius;
  const auto dets = ExtractAll(stack, cfg);
  Json found = Json::array();
  Json missing = Json::array();
  for (size_t i = 0; i < dets.size(); ++i) {
    if (!dets[i]) {
      missing.push_back(stack.names[i]);
      continue;
    }
    found.push_back({{"name", dets[i]->name},
                     {"pixel", {dets[i]->pixel.x(), dets[i]->pixel.y()}},
                     {"confidence", dets[i]->confidence}});
  }
  WriteJsonFile(a.out, {{"scale", stack.scale}, {"detections", found}, {"missing", missing}});
  ctx.WriteManifest(a.out);
  return 0;
}

// --- evaluate -----------------------------------------------------------------

int RunEvaluate(const EvaluateArgs& a) {
  RunContext ctx("evaluate");
  ctx.config() = {{"chain", a.chain},         {"intrinsics", a.intrinsics},
                  {"dataset", a.dataset},     {"pose", a.pose},
                  {"per_frame_poses", a.per_frame_poses},
                  {"csv", a.csv}};
  if (a.pose.empty() == a.per_frame_poses.empty()) {
    throw Error(ErrorKind::kValidationError,
                "exactly one of --pose and --per-frame-poses is required");
  }
  const KinematicChain chain = ReadChain(ctx, a.chain);
  const CameraIntrinsics k = ReadIntrinsics(ctx, a.intrinsics);
  const Dataset d = ReadDataset(ctx, a.dataset);
  if (d.frames.empty()) throw Error(ErrorKind::kEmptyEvaluation, "dataset has no frames");

  std::vector<Transform> poses;
  if (!a.pose.empty()) {
    poses.assign(d.frames.size(), PoseFromDocument(ctx.ReadJsonInput(a.pose)));
  } else {
    const Json j = ctx.ReadJsonInput(a.per_frame_poses);
    if (!j.contains("frames") || !j["frames"].is_array()) {
      throw Error(ErrorKind::kParseError, a.per_frame_poses + ": missing array 'frames'");
    }
    std::map<int, Transform> by_index;
    for (const Json& f : j["frames"]) {
      if (!f.contains("index") || !f["index"].is_number_integer()) {
        throw Error(ErrorKind::kParseError, a.per_frame_poses + ": frame without integer 'index'");
      }
      by_index[f["index"].get<int>()] = PoseFromDocument(f);
    }
    for (const FrameRecord& f : d.frames) {
      const auto it = by_index.find(f.index);
      if (it == by_index.end()) {
        throw Error(ErrorKind::kValidationError,
                    "no pose for frame " + std::to_string(f.index));
      }
      poses.push_back(it->second);
    }
  }

  std::vector<PckFrame> pck_frames;
  std::vector<double> add_errors;
  for (size_t i = 0; i < d.frames.size(); ++i) {
    const FrameRecord& f = d.frames[i];
    PckFrame pf;
    pf.ground_truth = f.gt_pixels;
    for (const NamedPixel& g : f.gt_pixels) pf.in_frustum.push_back(InImage(k, g.pixel));
    pf.detections = f.detections;
    pck_frames.push_back(std::move(pf));
    const std::vector<NamedPoint> kps = KeypointPositions(chain, f.joint_config);
    add_errors.push_back(AddMm(poses[i], f.gt_cam_from_base, kps));
  }
  const Curve pck = Pck(pck_frames);
  const Curve add = CurveAndAuc(add_errors, kAddThresholdsMm, kAddAucMaxMm);

  std::vector<double> sorted = add_errors;
  std::sort(sorted.begin(), sorted.end());
  const size_t n = sorted.size();
  const double median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  double mean = 0.0;
  for (double e : add_errors) mean += e;
  mean /= static_cast<double>(n);

  Json table_cols = Json::array();
  Json table_vals = Json::array();
  for (size_t i = 0; i < pck.thresholds.size(); ++i) {
    std::ostringstream name;
    name << "PCK@" << pck.thresholds[i] << "px";
    table_cols.push_back(name.str());
    table_vals.push_back(pck.fractions[i]);
  }
  table_cols.push_back("PCK AUC");
  table_vals.push_back(pck.auc);
  for (size_t i = 0; i < add.thresholds.size(); ++i) {
    std::ostringstream name;
    name << "ADD@" << add.thresholds[i] << "mm";
    table_cols.push_back(name.str());
    table_vals.push_back(add.fractions[i]);
  }
  table_cols.push_back("ADD AUC");
  table_vals.push_back(add.auc);

  Json report;
  report["n_frames"] = d.frames.size();
  report["pck"] = CurveSummary(pck, "px");
  report["add"] = CurveSummary(add, "mm");
  report["add"]["mean_mm"] = mean;
  report["add"]["median_mm"] = median;
  report["add"]["per_frame_mm"] = add_errors;
  report["table"] = {{"columns", table_cols}, {"values", table_vals}};
  WriteJsonFile(a.report, report);
  ctx.WriteManifest(a.report);

  if (!a.csv.empty()) {
    const std::vector<double> pck_t = DenseThresholds(kPckAucMaxPx);
    const std::vector<double> add_t = DenseThresholds(kAddAucMaxMm);
    WriteTextFile(a.csv + "_pck.csv",
                  CurveCsv(Pck(pck_frames, pck_t, kPckAucMaxPx), "px"));
    WriteTextFile(a.csv + "_add.csv",
                  CurveCsv(CurveAndAuc(add_errors, add_t, kAddAucMaxMm), "mm"));
  }
  return 0;
}

// --- sweep --------------------------------------------------------------------

namespace {

SweepSolver SolverFromName(const std::string& name) {
  if (name == "dream") return SweepSolver::kDreamPnp;
  if (name == "hec") return SweepSolver::kHandEye;
  throw Error(ErrorKind::kValidationError, "unknown solver '" + name + "' (dream|hec)");
}

}  // namespace

int RunSweep(const SweepArgs& a, int threads) {
  RunContext ctx("sweep");
  ctx.config() = {{"dataset", a.dataset}, {"solver", a.solver},  {"m_range", a.m_range},
                  {"big_m", a.big_m},     {"n_cap", a.n_cap},    {"refine", a.refine},
                  {"all_pairs", a.all_pairs}, {"threads", threads}};
  ctx.set_seed(a.seed);
  const SweepSolver solver = SolverFromName(a.solver);
  const std::vector<int> ms = ParseMRange(a.m_range);
  const Dataset d = ReadDataset(ctx, a.dataset);
  const Transform gt = StaticGroundTruth(d);
  const std::vector<SweepFrame> frames = SweepFramesFromDataset(d);
  const int big_m = a.big_m > 0 ? a.big_m : static_cast<int>(frames.size());
  if (big_m > static_cast<int>(frames.size())) {
    throw Error(ErrorKind::kValidationError, "--big-m exceeds the number of frames");
  }
  SweepOptions opt;
  opt.n_cap = a.n_cap;
  opt.seed = a.seed;
  opt.threads = threads;
  opt.pnp.refine = a.refine;
  opt.handeye.all_pairs = a.all_pairs;
  const SweepResult r =
      CombinationSweep(frames, big_m, solver, ms, gt, d.header.intrinsics, opt);
  WriteTextFile(a.out, SweepCsv(r));
  ctx.WriteManifest(a.out);
  return 0;
}

// --- handeye ------------------------------------------------------------------

int RunHandEye(const HandEyeArgs& a) {
  RunContext ctx("handeye");
  ctx.config() = {{"samples", a.samples}, {"all_pairs", a.all_pairs}};
  const std::vector<HandEyeSample> samples = HandEyeSamplesFromJson(ctx.ReadJsonInput(a.samples));
  HandEyeOptions opt;
  opt.all_pairs = a.all_pairs;
  WriteJsonFile(a.out, ToJson(SolveEyeOnBase(samples, opt)));
  ctx.WriteManifest(a.out);
  return 0;
}

// --- synth --------------------------------------------------------------------

int RunSynth(const SynthArgs& a, int threads) {
  RunContext ctx("synth");
  ctx.config() = {{"chain", a.chain},
                  {"intrinsics", a.intrinsics},
                  {"shell_config", a.shell_config},
                  {"noise_config", a.noise_config},
                  {"marker_config", a.marker_config},
                  {"frames", a.frames},
                  {"camera_mode", a.camera_mode},
                  {"min_visible", a.min_visible},
                  {"emit_belief_maps", a.emit_belief_maps},
                  {"belief_scale", a.belief_scale},
                  {"threads", threads}};
  ctx.set_seed(a.seed);
  const std::string chain_text = ctx.ReadInput(a.chain);
  const KinematicChain chain = LoadChain(chain_text);
  const CameraIntrinsics k = ReadIntrinsics(ctx, a.intrinsics);
  const CameraShellConfig shell = a.shell_config.empty()
                                      ? CameraShellConfig{}
                                      : ShellConfigFromJson(ctx.ReadJsonInput(a.shell_config));
  const NoiseConfig noise = a.noise_config.empty()
                                ? NoiseConfig{}
                                : NoiseConfigFromJson(ctx.ReadJsonInput(a.noise_config));
  if (a.frames < 1) throw Error(ErrorKind::kValidationError, "--frames must be >= 1");
  if (a.emit_belief_maps && !IsSupportedScale(a.belief_scale)) {
    throw Error(ErrorKind::kValidationError, "--belief-scale must be 1, 0.5 or 0.25");
  }

  GenerateOptions opt;
  opt.n_frames = a.frames;
  opt.camera_mode = CameraModeFromName(a.camera_mode);
  opt.seed = a.seed;
  opt.min_visible_keypoints = a.min_visible;
  opt.threads = threads;
  if (!a.marker_config.empty()) opt.marker = MarkerConfigFromJson(ctx.ReadJsonInput(a.marker_config));

  Dataset d = GenerateDataset(chain, k, shell, noise, opt);
  d.header.chain_path = a.chain;
  d.header.chain_hash = Sha256Hex(chain_text);

  fs::create_directories(a.out);
  if (a.emit_belief_maps) {
    fs::create_directories(fs::path(a.out) / "belief_maps");
    ParallelForOrdered(d.frames.size(), threads, [&](std::size_t i) {
      FrameRecord& f = d.frames[i];
      const std::string rel = "belief_maps/" + FrameFileName(f.index);
      WriteBeliefMapStack((fs::path(a.out) / rel).string(),
                          RenderFrameBeliefMaps(f, chain, k, a.belief_scale));
      f.belief_maps = rel;
    });
  }
  const std::string dataset_path = (fs::path(a.out) / "dataset.json").string();
  WriteJsonFile(dataset_path, ToJson(d));
  if (opt.marker) {
    WriteJsonFile((fs::path(a.out) / "handeye_samples.json").string(),
                  HandEyeSamplesToJson(SamplesFromDataset(d)));
  }
  ctx.WriteManifest(dataset_path);
  return 0;
}

// --- compare ------------------------------------------------------------------

int RunCompare(const CompareArgs& a, int threads) {
  RunContext ctx("compare");
  ctx.config() = {{"dataset", a.dataset},
                  {"hec_samples", a.hec_samples},
                  {"m_range", a.m_range},
                  {"n_cap", a.n_cap},
                  {"threads", threads}};
  ctx.set_seed(a.seed);
  const Dataset d = ReadDataset(ctx, a.dataset);
  const Transform gt = StaticGroundTruth(d);
  const CameraIntrinsics& k = d.header.intrinsics;
  std::vector<SweepFrame> frames = SweepFramesFromDataset(d);

  std::vector<HandEyeSample> samples;
  if (!a.hec_samples.empty()) {
    samples = HandEyeSamplesFromJson(ctx.ReadJsonInput(a.hec_samples));
    if (samples.size() != frames.size()) {
      throw Error(ErrorKind::kValidationError,
                  "hand-eye samples must pair one-to-one with dataset frames");
    }
    for (size_t i = 0; i < frames.size(); ++i) frames[i].handeye = samples[i];
  } else {
    samples = SamplesFromDataset(d);
    if (samples.size() != frames.size()) samples.clear();
  }

  std::vector<NamedTransform> estimates;
  std::vector<FrameObservation> obs;
  for (const SweepFrame& f : frames) obs.push_back(f.observation);
  estimates.push_back({"dream-pnp", SolveMultiFrame(obs, k).cam_from_robot});
  Json warnings = Json::array();
  if (!samples.empty()) {
    estimates.push_back({"hec-park-martin", SolveEyeOnBase(samples).cam_from_base});
  } else {
    warnings.push_back("hand-eye samples absent; report covers the keypoint solver only");
  }

  // Every keypoint of every frame is a workspace target.
  std::vector<Vec3> targets_cam;
  std::vector<Vec3> reference_base;
  for (const FrameRecord& f : d.frames) {
    for (const NamedPoint& p : f.keypoints3d) {
      reference_base.push_back(p.position);
      targets_cam.push_back(gt * p.position);
    }
  }
  const std::vector<WorkspaceStats> ws = WorkspaceErrorReport(estimates, targets_cam, reference_base);

  Json methods = Json::array();
  for (size_t i = 0; i < estimates.size(); ++i) {
    double add_sum = 0.0;
    for (const FrameRecord& f : d.frames) add_sum += AddMm(estimates[i].cam_from_base, gt, f.keypoints3d);
    methods.push_back({{"method", estimates[i].name},
                       {"cam_from_base", ToJson(estimates[i].cam_from_base)},
                       {"add_mm", add_sum / static_cast<double>(d.frames.size())},
                       {"workspace", ToJson(ws[i])}});
  }
  Json report = {{"n_frames", d.frames.size()}, {"methods", methods}, {"warnings", warnings}};

  if (!a.m_range.empty()) {
    const std::vector<int> ms = ParseMRange(a.m_range);
    SweepOptions opt;
    opt.n_cap = a.n_cap;
    opt.seed = a.seed;
    opt.threads = threads;
    const int big_m = static_cast<int>(frames.size());
    Json sweeps = Json::array();
    sweeps.push_back(ToJson(CombinationSweep(frames, big_m, SweepSolver::kDreamPnp, ms, gt, k, opt)));
    if (!samples.empty()) {
      std::vector<int> hec_ms;
      for (int m : ms) {
        if (m >= MinFramesFor(SweepSolver::kHandEye)) hec_ms.push_back(m);
      }
      if (!hec_ms.empty()) {
        sweeps.push_back(
            ToJson(CombinationSweep(frames, big_m, SweepSolver::kHandEye, hec_ms, gt, k, opt)));
      }
    }
    report["sweeps"] = sweeps;
  }
  WriteJsonFile(a.out, report);
  ctx.WriteManifest(a.out);
  return 0;
}

// --- schema -------------------------------------------------------------------

int RunSchema(const std::string& name) {
  if (name.empty()) {
    Json all = Json::object();
    for (const std::string& n : SchemaNames()) all[n] = Schema(n);
    std::cout << all.dump(2) << "\n";
    return 0;
  }
  const auto names = SchemaNames();
  if (std::find(names.begin(), names.end(), name) == names.end()) {
    throw Error(ErrorKind::kValidationError, "unknown schema '" + name + "'");
  }
  std::cout << Schema(name).dump(2) << "\n";
  return 0;
}

}  // namespace kpcalib::cli
