#include <selftest/oracles.hpp>

#include <posekit/formats.hpp>
#include <posekit/image.hpp>

#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <sstream>

using namespace posekit;

namespace {

std::string to_text(const auto& writer) {
  std::ostringstream out;
  writer(out);
  return out.str();
}

}  // namespace

TEST(FormatDouble, ShortestRoundTrip) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 10000; ++i) {
    const double v = u(rng) * std::pow(10.0, static_cast<int>(rng() % 20) - 10);
    EXPECT_EQ(parse_double(format_double(v)), v);
  }
  EXPECT_EQ(format_double(0.5), "0.5");
  EXPECT_EQ(format_double(1000), "1000");
}

TEST(ParseNumbers, RejectGarbage) {
  EXPECT_THROW(parse_double("1.5x"), FormatError);
  EXPECT_THROW(parse_double(""), FormatError);
  EXPECT_THROW(parse_long("3.0"), FormatError);
  EXPECT_EQ(parse_double("+2.5"), 2.5);
}

TEST(Ppm, RoundTripIsBitExact) {
  ImageBuffer img(13, 7);
  std::mt19937_64 rng(2);
  for (auto& v : img.data) v = static_cast<std::uint8_t>(rng());
  std::stringstream buf;
  write_ppm(buf, img);
  const std::string bytes = buf.str();
  const auto back = read_ppm(buf);
  EXPECT_EQ(back, img);
  std::stringstream again;
  write_ppm(again, back);
  EXPECT_EQ(again.str(), bytes);
}

TEST(Ppm, AcceptsHeaderComments) {
  std::string data = "P6\n# made by hand\n2 1\n# depth\n255\n";
  data += std::string("\x01\x02\x03\xfd\xfe\xff", 6);
  std::stringstream in(data);
  const auto img = read_ppm(in);
  EXPECT_EQ(img.width, 2);
  EXPECT_EQ(img.get(1, 0), (Rgb{0xfd, 0xfe, 0xff}));
}

TEST(Ppm, RejectsMalformedInput) {
  std::stringstream p3("P3\n1 1\n255\n0 0 0\n");
  EXPECT_THROW(read_ppm(p3), std::runtime_error);
  std::stringstream deep("P6\n1 1\n65535\n\0\0\0\0\0\0");
  EXPECT_THROW(read_ppm(deep), std::runtime_error);
  std::stringstream truncated("P6\n4 4\n255\nabc");
  EXPECT_THROW(read_ppm(truncated), std::runtime_error);
  EXPECT_THROW(load_ppm("/nonexistent/posekit.ppm"), std::runtime_error);
}

TEST(ModelFormat, RoundTrip) {
  std::mt19937_64 rng(3);
  const auto model = make_object_model("duck", oracle::random_cloud(rng, 50), true);
  const std::string text = to_text([&](std::ostream& o) { write_model(o, model); });
  std::istringstream in(text);
  const auto back = read_model(in);
  EXPECT_EQ(back.id, "duck");
  EXPECT_TRUE(back.symmetric);
  EXPECT_EQ(back.points, model.points);
  EXPECT_EQ(back.diameter, model.diameter);
  EXPECT_EQ(to_text([&](std::ostream& o) { write_model(o, back); }), text);
}

TEST(ModelFormat, ReportsErrorsWithLineNumbers) {
  std::istringstream no_header("1 2 3\n");
  EXPECT_THROW(read_model(no_header), FormatError);
  std::istringstream bad_point("model m symmetric=0\n1 2 3\n1 2\n");
  try {
    read_model(bad_point);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
  std::istringstream empty("model m symmetric=1\n");
  EXPECT_THROW(read_model(empty), FormatError);
}

TEST(AnnotationFormat, RoundTripIsBitExact) {
  std::mt19937_64 rng(4);
  std::vector<Annotation> anns;
  for (int i = 0; i < 20; ++i) anns.push_back({"obj" + std::to_string(i % 3), oracle::random_pose(rng)});
  const std::string text = to_text([&](std::ostream& o) { write_annotations(o, anns); });
  std::istringstream in(text);
  const auto back = read_annotations(in);
  ASSERT_EQ(back.size(), anns.size());
  for (std::size_t i = 0; i < anns.size(); ++i) {
    EXPECT_EQ(back[i].model_id, anns[i].model_id);
    EXPECT_EQ(back[i].pose.rotation.r, anns[i].pose.rotation.r);
    EXPECT_EQ(back[i].pose.translation, anns[i].pose.translation);
  }
  EXPECT_EQ(to_text([&](std::ostream& o) { write_annotations(o, back); }), text);
}

TEST(AnnotationFormat, SkipsCommentsAndRejectsShortLines) {
  std::istringstream ok("# header\n\nduck 0 0 0 1 2 3\n");
  EXPECT_EQ(read_annotations(ok).size(), 1u);
  std::istringstream bad("duck 0 0 0 1 2\n");
  EXPECT_THROW(read_annotations(bad), FormatError);
}

TEST(PredictionFormat, RoundTripAndValidation) {
  std::vector<std::vector<PoseEstimate>> preds(3);
  preds[0].push_back({"a", {AxisAngle(0.1, 0.2, 0.3), Vec3(1, 2, 3)}, 0.75});
  preds[2].push_back({"b", {AxisAngle(), Vec3(0, 0, 900)}, 1.0});
  const std::string text = to_text([&](std::ostream& o) { write_predictions(o, preds); });
  std::istringstream in(text);
  const auto back = read_predictions(in, 3);
  ASSERT_EQ(back.size(), 3u);
  EXPECT_EQ(back[0][0].score, 0.75);
  EXPECT_EQ(back[2][0].pose.translation.z(), 900.0);
  std::istringstream out_of_range("5 a 0.5 0 0 0 0 0 1\n");
  EXPECT_THROW(read_predictions(out_of_range, 3), FormatError);
  std::istringstream bad_score("0 a 1.5 0 0 0 0 0 1\n");
  EXPECT_THROW(read_predictions(bad_score, 3), FormatError);
}

TEST(Manifest, RoundTrip) {
  Manifest m;
  m.intrinsics = {572.4114, 573.57043, 325.2611, 242.04899};
  m.models = {{"ape", "models/ape.txt"}};
  m.frames = {{"frames/0.ppm", "frames/0.txt"}, {"frames/1.ppm", "frames/1.txt"}};
  const std::string text = to_text([&](std::ostream& o) { write_manifest(o, m); });
  std::istringstream in(text);
  const auto back = read_manifest(in);
  EXPECT_EQ(back.intrinsics.fy, m.intrinsics.fy);
  EXPECT_EQ(back.models, m.models);
  ASSERT_EQ(back.frames.size(), 2u);
  EXPECT_EQ(back.frames[1].annotations, "frames/1.txt");
  std::istringstream missing("model a a.txt\n");
  EXPECT_THROW(read_manifest(missing), FormatError);
  std::istringstream unknown("intrinsics 1 1 0 0\nbogus line\n");
  EXPECT_THROW(read_manifest(unknown), FormatError);
}

TEST(Config, KeyValueLines) {
  std::istringstream in("# comment\nwidth 640\nobject duck kind=box size=1,2,3\n  noise   2.5  \n");
  const auto cfg = read_config(in);
  ASSERT_EQ(cfg.size(), 3u);
  EXPECT_EQ(cfg[1].first, "object");
  EXPECT_EQ(cfg[1].second, "duck kind=box size=1,2,3");
  EXPECT_EQ(cfg[2].second, "2.5");
  std::istringstream bad("lonely\n");
  EXPECT_THROW(read_config(bad), FormatError);
}

TEST(Dataset, LoadResolvesPathsRelativeToManifest) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "posekit_formats_dataset";
  fs::remove_all(dir);
  fs::create_directories(dir / "m");
  save_model((dir / "m/a.txt").string(), make_object_model("a", {Vec3(0, 0, 0), Vec3(1, 0, 0)}, false));
  save_ppm((dir / "f.ppm").string(), ImageBuffer(2, 2, Rgb{1, 2, 3}));
  save_annotations((dir / "f.txt").string(), {{"a", Pose{AxisAngle(), Vec3(0, 0, 500)}}});
  Manifest m;
  m.intrinsics = {100, 100, 1, 1};
  m.models = {{"a", "m/a.txt"}};
  m.frames = {{"f.ppm", "f.txt"}};
  {
    std::ofstream out(dir / "set.manifest");
    write_manifest(out, m);
  }
  const auto ds = load_dataset((dir / "set.manifest").string());
  EXPECT_EQ(ds.models.at("a").diameter, 1.0);
  ASSERT_EQ(ds.frames.size(), 1u);
  EXPECT_EQ(ds.frames[0].image.get(1, 1), (Rgb{1, 2, 3}));
  EXPECT_EQ(ds.frames[0].intrinsics.fx, 100.0);
  fs::remove_all(dir);
}
