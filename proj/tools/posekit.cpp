// posekit: synthetic data, 6D augmentation, ADD(-S) evaluation, pose fitting
// trials, overlays and the self-test, behind one CLI.
//
// Exit codes: 0 success, 1 operational failure, 2 usage error.

#include <selftest/acceptance_suite.hpp>

#include <posekit/posekit.hpp>

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

using namespace posekit;

namespace {

struct SynthArgs {
  std::string config;
  std::string out;
  std::optional<int> frames;
  std::uint64_t seed = 1;
};

struct AugmentArgs {
  std::string image;
  std::string annotations;
  std::vector<double> intrinsics;
  std::optional<double> theta;
  std::optional<double> scale;
  std::uint64_t seed = 1;
  std::string color = "on";
  std::string out_image;
  std::string out_annotations;
};

struct EvalArgs {
  std::string manifest;
  std::string predictions;
};

struct FitArgs {
  std::string model;
  int trials = 100;
  std::uint64_t seed = 1;
  std::string out;
  bool ablation = false;
  std::string perturbation = "random_rigid";
  unsigned threads = 0;
  fit::FitConfig cfg;
};

struct RenderArgs {
  std::string manifest;
  std::size_t frame = 0;
  std::string predictions;
  std::string out;
};

struct SelftestArgs {
  std::vector<int> only;
};

int run_synth(const SynthArgs& a) {
  auto in = std::ifstream(a.config);
  if (!in) throw std::runtime_error("cannot open config '" + a.config + "'");
  const auto cfg = synth::parse_scene_config(read_config(in));
  const int frames = a.frames.value_or(cfg.frames);
  if (frames < 0) throw std::invalid_argument("--frames must be non-negative");
  const auto manifest = synth::write_dataset(a.out, cfg.scene, frames, a.seed);
  std::cout << "wrote " << manifest.frames.size() << " frames and " << manifest.models.size() << " models to "
            << a.out << "/dataset.manifest\n";
  return 0;
}

int run_augment(const AugmentArgs& a) {
  const CameraIntrinsics k{a.intrinsics[0], a.intrinsics[1], a.intrinsics[2], a.intrinsics[3]};
  validate(k);
  AnnotatedFrame frame;
  frame.image = load_ppm(a.image);
  frame.intrinsics = k;
  frame.annotations = load_annotations(a.annotations);

  std::mt19937_64 rng(a.seed);
  const AugmentParams defaults;
  const double theta =
      a.theta ? *a.theta : std::uniform_real_distribution<double>(defaults.theta_range.lo, defaults.theta_range.hi)(rng);
  const double scale =
      a.scale ? *a.scale : std::uniform_real_distribution<double>(defaults.scale_range.lo, defaults.scale_range.hi)(rng);
  if (!(scale > 0.0)) throw std::invalid_argument("--scale must be positive");

  ImageBuffer image = warp_image(frame.image, theta, scale, k);
  if (a.color == "on") image = color_augment(image, rng, defaults.color_n_range, defaults.color_m_range);
  std::vector<Annotation> anns;
  for (const auto& ann : frame.annotations) anns.push_back({ann.model_id, augment_pose(ann.pose, theta, scale)});

  save_ppm(a.out_image, image);
  save_annotations(a.out_annotations, anns);
  std::cout << "theta=" << format_double(theta) << " scale=" << format_double(scale) << " color=" << a.color << '\n';
  return 0;
}

int run_eval(const EvalArgs& a) {
  const auto ds = load_dataset(a.manifest, false);
  const auto preds = load_predictions(a.predictions, ds.frames.size());
  write_report(std::cout, evaluate(ds.frames, preds, ds.models));
  return 0;
}

fit::InitPerturbation parse_perturbation(const std::string& s) {
  for (auto p : {fit::InitPerturbation::random_rigid, fit::InitPerturbation::augmentation,
                 fit::InitPerturbation::scale_only, fit::InitPerturbation::rotation_only}) {
    if (fit::to_string(p) == s) return p;
  }
  throw std::invalid_argument("unknown perturbation '" + s + "'");
}

int run_fit(const FitArgs& a) {
  fit::validate(a.cfg);
  const ObjectModel model = a.model.empty() ? fit::default_trial_model() : load_model(a.model);
  fit::TrialConfig tc;
  tc.trials = a.trials;
  tc.seed = a.seed;
  tc.perturbation = parse_perturbation(a.perturbation);

  if (a.ablation) {
    fit::write_ablation_table(std::cout, fit::run_ablation(model, tc, a.cfg, a.threads));
    return 0;
  }
  const auto rs = fit::run_fit_trials(model, tc, a.cfg, a.threads);
  if (!a.out.empty()) {
    auto out = detail::create_text(a.out);
    fit::write_trials_csv(out, rs, a.cfg, tc);
  }
  int max_iter = 0;
  for (const auto& r : rs) max_iter = std::max(max_iter, r.iterations);
  std::cout << "model=" << model.id << " diameter=" << format_double(model.diameter) << '\n'
            << "successes=" << fit::count_successes(rs) << '/' << rs.size() << '\n'
            << "max_iterations_used=" << max_iter << '\n';
  return 0;
}

int run_render(const RenderArgs& a) {
  const auto ds = load_dataset(a.manifest);
  if (a.frame >= ds.frames.size()) {
    throw std::out_of_range("frame " + std::to_string(a.frame) + " out of range (" +
                            std::to_string(ds.frames.size()) + " frames)");
  }
  const auto& frame = ds.frames[a.frame];
  ImageBuffer img = frame.image;
  for (const auto& ann : frame.annotations) {
    img = synth::render_cuboid_overlay(img, ann.pose, ds.models.at(ann.model_id), frame.intrinsics,
                                       synth::kGroundTruthColor);
  }
  if (!a.predictions.empty()) {
    const auto preds = load_predictions(a.predictions, ds.frames.size());
    const auto& mine = preds[a.frame];
    for (std::size_t i = 0; i < mine.size(); ++i) {
      const auto it = ds.models.find(mine[i].model_id);
      if (it == ds.models.end()) throw std::runtime_error("prediction names unknown model '" + mine[i].model_id + "'");
      img = synth::render_cuboid_overlay(img, mine[i].pose, it->second, frame.intrinsics, synth::prediction_color(i));
    }
  }
  save_ppm(a.out, img);
  return 0;
}

int run_selftest(const SelftestArgs& a) {
  const int failures = selftest::run_acceptance(std::cout, a.only);
  std::cout << (failures == 0 ? "selftest passed" : "selftest failed: " + std::to_string(failures)) << '\n';
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"posekit: 6D pose toolkit"};
  app.require_subcommand(1);

  SynthArgs synth_args;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset from a scene config");
  synth_cmd->add_option("--config", synth_args.config, "Scene config file")->required()->check(CLI::ExistingFile);
  synth_cmd->add_option("--out", synth_args.out, "Output directory")->required();
  synth_cmd->add_option("--frames", synth_args.frames, "Frame count (overrides the config)");
  synth_cmd->add_option("--seed", synth_args.seed, "Random seed")->capture_default_str();

  AugmentArgs aug;
  auto* aug_cmd = app.add_subcommand("augment", "Apply 6D and color augmentation to one frame");
  aug_cmd->add_option("--image", aug.image, "Input PPM")->required()->check(CLI::ExistingFile);
  aug_cmd->add_option("--annotations", aug.annotations, "Input annotations")->required()->check(CLI::ExistingFile);
  aug_cmd->add_option("--intrinsics", aug.intrinsics, "fx,fy,px,py")->required()->expected(4)->delimiter(',');
  aug_cmd->add_option("--theta", aug.theta, "In-plane rotation in degrees (sampled when absent)");
  aug_cmd->add_option("--scale", aug.scale, "Scale factor (sampled when absent)");
  aug_cmd->add_option("--seed", aug.seed, "Random seed")->capture_default_str();
  aug_cmd->add_option("--color", aug.color, "Color augmentation")->check(CLI::IsMember({"on", "off"}))->capture_default_str();
  aug_cmd->add_option("--out-image", aug.out_image, "Output PPM")->required();
  aug_cmd->add_option("--out-annotations", aug.out_annotations, "Output annotations")->required();

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Score predictions with ADD(-S)");
  eval_cmd->add_option("--manifest", eval.manifest, "Dataset manifest")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--predictions", eval.predictions, "Predictions file")->required()->check(CLI::ExistingFile);

  FitArgs fa;
  auto* fit_cmd = app.add_subcommand("fit", "Run seeded pose-fitting trials");
  fit_cmd->add_option("--model", fa.model, "Model file (default: built-in box)")->check(CLI::ExistingFile);
  fit_cmd->add_option("--trials", fa.trials, "Trial count")->capture_default_str()->check(CLI::NonNegativeNumber);
  fit_cmd->add_option("--seed", fa.seed, "Base seed")->capture_default_str();
  fit_cmd->add_option("--out", fa.out, "Per-trial CSV");
  fit_cmd->add_flag("--ablation", fa.ablation, "Success rate per init perturbation family");
  fit_cmd->add_option("--perturbation", fa.perturbation, "Init perturbation family")
      ->check(CLI::IsMember({"random_rigid", "6d_augmentation", "scale_only", "rotation_only"}))
      ->capture_default_str();
  fit_cmd->add_option("--lr", fa.cfg.learning_rate, "Base learning rate")->capture_default_str();
  fit_cmd->add_option("--rotation-lr-scale", fa.cfg.rotation_lr_scale, "Rotation lr multiplier")->capture_default_str();
  fit_cmd->add_option("--translation-lr-scale", fa.cfg.translation_lr_scale, "Translation lr multiplier")
      ->capture_default_str();
  fit_cmd->add_option("--max-iterations", fa.cfg.max_iterations, "Iteration cap")->capture_default_str();
  fit_cmd->add_option("--threads", fa.threads, "Worker threads (0 = all cores)")->capture_default_str();

  RenderArgs ra;
  auto* render_cmd = app.add_subcommand("render", "Draw ground truth (green) and predicted cuboids");
  render_cmd->add_option("--manifest", ra.manifest, "Dataset manifest")->required()->check(CLI::ExistingFile);
  render_cmd->add_option("--frame", ra.frame, "Frame index")->capture_default_str();
  render_cmd->add_option("--predictions", ra.predictions, "Predictions file")->check(CLI::ExistingFile);
  render_cmd->add_option("--out", ra.out, "Output PPM")->required();

  SelftestArgs st;
  auto* selftest_cmd = app.add_subcommand("selftest", "Run the built-in oracle checks");
  selftest_cmd->add_option("--only", st.only, "Criterion ids to run")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*synth_cmd) return run_synth(synth_args);
    if (*aug_cmd) return run_augment(aug);
    if (*eval_cmd) return run_eval(eval);
    if (*fit_cmd) return run_fit(fa);
    if (*render_cmd) return run_render(ra);
    if (*selftest_cmd) return run_selftest(st);
  } catch (const std::exception& e) {
    std::cerr << "posekit: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
