#include <CLI11.hpp>
#include <filesystem>
#include <iostream>

#include "commands.hpp"
#include "run_context.hpp"

using namespace kpcalib;
using namespace kpcalib::cli;

int main(int argc, char** argv) {
  CLI::App app{"Camera-to-robot extrinsics from robot keypoints"};
  app.require_subcommand(1);
  app.set_version_flag("--version", KPCALIB_VERSION);
  int threads = 1;
  app.add_option("--threads", threads, "Upper bound on worker threads")
      ->check(CLI::Range(1, 1024))
      ->capture_default_str();
  app.fallthrough();

  int code = 0;

  CalibrateArgs cal;
  auto* c = app.add_subcommand("calibrate", "Solve camera pose from keypoint frames");
  c->add_option("--chain", cal.chain, "Chain JSON")->required();
  c->add_option("--intrinsics", cal.intrinsics, "Intrinsics JSON")->required();
  c->add_option("--frames", cal.frames, "Frames or dataset JSON")->required();
  c->add_option("--belief-maps", cal.belief_maps, "Directory of BMAP stacks; replaces detections");
  c->add_flag("--multiframe", cal.multiframe, "One PnP over all frames");
  c->add_flag("--refine,!--no-refine", cal.refine, "Reprojection refinement (default on)");
  c->add_flag("--confidence-weighting", cal.confidence_weighting);
  c->add_flag("--robust", cal.robust, "Huber loss in refinement");
  c->add_option("--peak-threshold", cal.peak_threshold)->capture_default_str();
  c->add_option("--out", cal.out, "Pose JSON")->required();
  c->callback([&] { code = RunCalibrate(cal, threads); });

  ExtractArgs ext;
  auto* e = app.add_subcommand("extract", "Peak detections from a belief-map stack");
  e->add_option("--belief-maps", ext.input, "BMAP file")->required();
  e->add_option("--peak-threshold", ext.peak_threshold)->capture_default_str();
  e->add_option("--smooth-sigma", ext.smooth_sigma)->capture_default_str();
  e->add_option("--window-radius", ext.window_radius)->capture_default_str();
  e->add_option("--out", ext.out, "Detections JSON")->required();
  e->callback([&] { code = RunExtract(ext); });

  EvaluateArgs ev;
  auto* v = app.add_subcommand("evaluate", "PCK and ADD report for a dataset");
  v->add_option("--chain", ev.chain)->required();
  v->add_option("--intrinsics", ev.intrinsics)->required();
  v->add_option("--dataset", ev.dataset)->required();
  auto* pose_opt = v->add_option("--pose", ev.pose, "One pose for every frame");
  auto* per_opt = v->add_option("--per-frame-poses", ev.per_frame_poses, "Single-frame calibrate output");
  pose_opt->excludes(per_opt);
  v->add_option("--report", ev.report, "Report JSON")->required();
  v->add_option("--csv", ev.csv, "Prefix for dense curve CSVs");
  v->callback([&] { code = RunEvaluate(ev); });

  SweepArgs sw;
  auto* s = app.add_subcommand("sweep", "ADD versus number of frames");
  s->add_option("--dataset", sw.dataset)->required();
  s->add_option("--solver", sw.solver)->check(CLI::IsMember({"dream", "hec"}))->capture_default_str();
  s->add_option("--m-range", sw.m_range, "e.g. 1,3,6 or 1..18")->capture_default_str();
  s->add_option("--big-m", sw.big_m, "Frames in the sequence (default all)");
  s->add_option("--n-cap", sw.n_cap)->capture_default_str();
  s->add_option("--seed", sw.seed)->capture_default_str();
  s->add_flag("--refine,!--no-refine", sw.refine);
  s->add_flag("--all-pairs", sw.all_pairs, "Hand-eye: use every sample pair");
  s->add_option("--out", sw.out, "CSV")->required();
  s->callback([&] { code = RunSweep(sw, threads); });

  HandEyeArgs he;
  auto* h = app.add_subcommand("handeye", "AX=XB eye-on-base baseline");
  h->add_option("--samples", he.samples)->required();
  h->add_flag("--all-pairs", he.all_pairs);
  h->add_option("--out", he.out)->required();
  h->callback([&] { code = RunHandEye(he); });

  SynthArgs sy;
  auto* g = app.add_subcommand("synth", "Generate a synthetic dataset");
  g->add_option("--chain", sy.chain)->required();
  g->add_option("--intrinsics", sy.intrinsics)->required();
  g->add_option("--shell-config", sy.shell_config);
  g->add_option("--noise-config", sy.noise_config);
  g->add_option("--marker-config", sy.marker_config, "Also emit hand-eye samples");
  g->add_option("--frames", sy.frames)->capture_default_str();
  g->add_option("--camera-mode", sy.camera_mode)
      ->check(CLI::IsMember({"static", "per-frame"}))
      ->capture_default_str();
  g->add_option("--seed", sy.seed)->capture_default_str();
  g->add_option("--min-visible", sy.min_visible)->capture_default_str();
  g->add_flag("--emit-belief-maps", sy.emit_belief_maps);
  g->add_option("--belief-scale", sy.belief_scale)->capture_default_str();
  g->add_option("--out", sy.out, "Output directory")->required();
  g->callback([&] { code = RunSynth(sy, threads); });

  CompareArgs cm;
  auto* p = app.add_subcommand("compare", "Keypoint solver versus hand-eye baseline");
  p->add_option("--dataset", cm.dataset)->required();
  p->add_option("--hec-samples", cm.hec_samples);
  p->add_option("--m-range", cm.m_range, "Also sweep these frame counts");
  p->add_option("--n-cap", cm.n_cap)->capture_default_str();
  p->add_option("--seed", cm.seed)->capture_default_str();
  p->add_option("--out", cm.out)->required();
  p->callback([&] { code = RunCompare(cm, threads); });

  std::string schema_name;
  auto* sc = app.add_subcommand("schema", "Print JSON schemas");
  sc->add_option("name", schema_name, "One schema; all when omitted");
  sc->callback([&] { code = RunSchema(schema_name); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::CallForAllHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::CallForVersion& ex) {
    return app.exit(ex);
  } catch (const CLI::ParseError& ex) {
    std::cerr << ErrorJson("UsageError", ex.what(), 1) << "\n";
    return 1;
  } catch (const Error& ex) {
    const int exit_code = ExitCodeFor(ex.kind());
    std::cerr << ErrorJson(ErrorKindName(ex.kind()), ex.what(), exit_code) << "\n";
    return exit_code;
  } catch (const nlohmann::json::exception& ex) {
    std::cerr << ErrorJson("ParseError", ex.what(), 1) << "\n";
    return 1;
  } catch (const std::filesystem::filesystem_error& ex) {
    std::cerr << ErrorJson("IoError", ex.what(), 1) << "\n";
    return 1;
  }
  return code;
}
