#include <doctest.h>

#include <algorithm>
#include <boost/archive/iterators/binary_from_base64.hpp>
#include <boost/archive/iterators/transform_width.hpp>
#include <cstdlib>
#include <fstream>
#include <sys/wait.h>
#include <sstream>
#include <thread>

#include "facetouch/ingest/tables.hpp"
#include "facetouch_cli/annotation.hpp"
#include "facetouch_cli/commands.hpp"
#include "support/fixtures.hpp"

// After the Eigen-based headers.
#include <httplib.h>

using namespace facetouch;
using namespace facetouch::cli;
using fixture::error_of;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

RunConfig small_run() {
  RunConfig c;
  c.synth.n_videos = 6;
  c.synth.n_infants = 3;
  c.synth.frames_per_video = 40;
  c.synth.image_width = 96;
  c.synth.image_height = 96;
  c.synth.target_prevalence = 0.3;
  c.synth.seed = 12;
  c.pipeline.seed = 2;
  c.pipeline.folds = 3;
  c.pipeline.forest.n_trees = 10;
  c.pipeline.grid.pca_thresholds = {0.95};
  c.pipeline.grid.latent_sizes = {6};
  c.pipeline.grid.epochs = {3};
  c.pipeline.grid.C = {1.0};
  c.pipeline.grid.gammas = {std::nullopt};
  return c;
}

// A rendered corpus shared by the tests below; created once.
const fs::path& corpus() {
  static const fs::path dir = [] {
    const auto d = fixture::temp_dir("cli_corpus");
    cmd_synth(small_run(), d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string decode_base64(std::string text) {
  using namespace boost::archive::iterators;
  using Decoder = transform_width<binary_from_base64<std::string::const_iterator>, 8, 6>;
  const std::size_t pad = text.size() - text.find_last_not_of('=') - 1;
  std::replace(text.end() - long(pad), text.end(), '=', 'A');
  std::string out(Decoder(text.cbegin()), Decoder(text.cend()));
  out.resize(out.size() - pad);
  return out;
}

std::vector<std::string> lines_of(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

json labels_payload(const std::string& version, std::size_t frames) {
  json rows = json::array();
  for (std::size_t f = 0; f < frames; ++f) {
    rows.push_back({{"frame_index", f},
                    {"on_head", f % 4 == 0},
                    {"eyes", false},
                    {"ears", false},
                    {"nose", f % 8 == 0},
                    {"mouth", f % 4 == 0 && f % 8 != 0},
                    {"cheeks", false}});
  }
  return {{"version", version}, {"labels", rows}};
}

}  // namespace

TEST_CASE("run config parsing") {
  const RunConfig d;
  const auto j = run_config_to_json(d);
  const auto back = run_config_from_json(j);
  CHECK(run_config_to_json(back) == j);
  CHECK(config_hash(back) == config_hash(d));

  json partial = {{"pipeline", {{"seed", 9}, {"grid", {{"C", {2.0}}, {"gammas", {"scale", 0.5}}}}}}};
  const auto p = run_config_from_json(partial);
  CHECK(p.pipeline.seed == 9);
  CHECK(p.pipeline.grid.C == std::vector<double>{2.0});
  REQUIRE(p.pipeline.grid.gammas.size() == 2);
  CHECK_FALSE(p.pipeline.grid.gammas[0].has_value());
  CHECK(p.pipeline.grid.gammas[1] == 0.5);
  CHECK(p.pipeline.grid.pca_thresholds == d.pipeline.grid.pca_thresholds);
  CHECK(config_hash(p) != config_hash(d));

  CHECK(error_of([] { run_config_from_json({{"pipline", json::object()}}); }) == ErrorCode::InvalidConfig);
  CHECK(error_of([] { run_config_from_json({{"pipeline", {{"grid", {{"Cs", {1}}}}}}}); }) == ErrorCode::InvalidConfig);
  CHECK(error_of([] { run_config_from_json({{"synth", {{"n_videos", "many"}}}}); }) == ErrorCode::InvalidConfig);

  const auto lines = provenance_lines(d, "train");
  const std::string all = [&] {
    std::string s;
    for (const auto& l : lines) s += l + "\n";
    return s;
  }();
  CHECK(all.find(config_hash(d)) != std::string::npos);
  CHECK(all.find("train") != std::string::npos);
  CHECK(all.find(kToolVersion) != std::string::npos);
}

TEST_CASE("input references") {
  const auto a = parse_input_ref("data/set");
  CHECK(a.path == fs::path("data/set"));
  CHECK(a.half == InputRef::Half::All);
  CHECK(parse_input_ref("x.csv#first").half == InputRef::Half::First);
  CHECK(parse_input_ref("x.csv#second").path == fs::path("x.csv"));
  CHECK(error_of([] { parse_input_ref("x#third"); }) == ErrorCode::InvalidArgument);
  CHECK(resolve_manifest_path(corpus()) == corpus() / "manifest.json");
  CHECK(resolve_manifest_path(corpus() / "manifest") == corpus() / "manifest.json");
}

TEST_CASE("extract writes one row per frame with a provenance header") {
  const auto out = fixture::temp_dir("cli_extract") / "f.csv";
  const auto rows = cmd_extract(small_run(), corpus() / "manifest", out);
  CHECK(rows == 6 * 40);
  const auto lines = lines_of(out);
  REQUIRE(lines.size() > 2);
  CHECK(lines[0].rfind("# ", 0) == 0);
  const auto m = read_feature_matrix(out);
  CHECK(m.rows() == 240);
  CHECK(m.cols() == kNonHogFeatureCount);
  CHECK(m.fully_labeled());

  // Same inputs, same bytes.
  const auto again = fixture::temp_dir("cli_extract2") / "f.csv";
  cmd_extract(small_run(), corpus() / "manifest", again);
  CHECK(slurp(out) == slurp(again));

  auto hog = small_run();
  hog.include_hog = true;
  const auto hog_out = fixture::temp_dir("cli_extract_hog") / "h.csv";
  cmd_extract(hog, corpus(), hog_out);
  CHECK(read_feature_matrix(hog_out).cols() == kNonHogFeatureCount + 540);
}

TEST_CASE("train, predict, evaluate and correlate") {
  const auto dir = fixture::temp_dir("cli_flow");
  const auto cfg = small_run();
  const auto features = dir / "f.csv";
  cmd_extract(cfg, corpus(), features);

  const auto model = cmd_train(cfg, {features.string() + "#first"}, dir / "m.json");
  CHECK(fs::exists(dir / "m.json"));
  CHECK(model.train_rows == 3 * 40);
  CHECK(lines_of(dir / "m.json")[0].rfind("{", 0) == 0);

  // Binary predictions: one row per frame, infants from the manifest.
  const auto n = cmd_predict(cfg, dir / "m.json", corpus().string(), dir / "p.csv");
  CHECK(n == 240);
  const auto plines = lines_of(dir / "p.csv");
  std::size_t data = 0;
  bool header_seen = false;
  for (const auto& l : plines) {
    if (l.rfind("#", 0) == 0) continue;
    if (!header_seen) {
      CHECK(l == "video_id,infant_id,frame_index,on_head");
      header_seen = true;
      continue;
    }
    ++data;
  }
  CHECK(data == 240);
  CHECK(cmd_predict(cfg, dir / "m.json", features.string(), dir / "p2.csv", corpus() / "manifest.json") == 240);

  const auto corr = cmd_correlate(cfg, dir / "p.csv", corpus() / "mullen.csv", dir / "corr.json");
  CHECK(corr.infants.size() == 3);
  for (const auto& i : corr.infants) {
    CHECK(i.frames == 80);
    CHECK(i.touch_ratio >= 0.0);
    CHECK(i.touch_ratio <= 1.0);
    CHECK(i.fm_rate.has_value());
  }
  CHECK(corr.fm.has_value());
  CHECK(corr.gm.has_value());
  const auto cj = json::parse(slurp(dir / "corr.json").substr(slurp(dir / "corr.json").find('{')));
  CHECK(cj.contains("fm"));

  // Direct evaluation on the held-out half.
  EvaluateArgs args;
  args.models = {dir / "m.json"};
  args.test = features.string() + "#second";
  args.out = dir / "report.json";
  args.out_text = dir / "report.txt";
  const auto rep = cmd_evaluate(cfg, args);
  REQUIRE(rep.configurations.size() == 1);
  CHECK(rep.configurations[0].rows.size() == 3);
  CHECK(rep.configurations[0].test_rows == 120);
  const auto text = slurp(dir / "report.txt");
  CHECK(text.find("Zero Rule") != std::string::npos);
  CHECK(text.find("Random chance") != std::string::npos);

  // Multi-label model with region columns in the prediction file.
  auto ml = cfg;
  ml.pipeline.task = Task::MultiLabelRegions;
  ml.pipeline.folds = 2;
  cmd_train(ml, {features.string()}, dir / "ml.json");
  cmd_predict(ml, dir / "ml.json", corpus().string(), dir / "pm.csv");
  bool found = false;
  for (const auto& l : lines_of(dir / "pm.csv"))
    if (l.rfind("video_id", 0) == 0) {
      CHECK(l == "video_id,infant_id,frame_index,on_head,eyes,ears,nose,mouth,cheeks");
      found = true;
    }
  CHECK(found);
}

TEST_CASE("protocol evaluation runs the three configurations") {
  auto cfg = small_run();
  cfg.synth.n_videos = 6;
  cfg.synth.seed = 40;
  const auto a = fixture::temp_dir("cli_proto_a");
  cmd_synth(cfg, a);
  cfg.synth.seed = 41;
  const auto b = fixture::temp_dir("cli_proto_b");
  cmd_synth(cfg, b);
  EvaluateArgs args;
  args.dataset_a = a.string();
  args.dataset_b = b.string();
  args.out = fixture::temp_dir("cli_proto_out") / "r.json";
  const auto rep = cmd_evaluate(cfg, args);
  CHECK(rep.configurations.size() == 3);
  for (const auto& c : rep.configurations) CHECK(c.rows.size() == 3);
  CHECK(rep.configurations[2].test_rows == 3 * 40);
}

TEST_CASE("annotation service handlers") {
  // A private copy so label writes do not disturb the shared corpus.
  const auto dir = fixture::temp_dir("cli_annotate");
  fs::copy(corpus(), dir, fs::copy_options::recursive | fs::copy_options::overwrite_existing);
  const auto manifest = load_manifest(dir / "manifest.json");
  const std::string vid = manifest.videos[1].video_id;
  const auto landmark_before = slurp(manifest.videos[1].landmarks_path);
  const auto frame_before = slurp(*manifest.videos[1].frames_dir / frame_file_name(3));

  AnnotationService svc(manifest);
  auto list = svc.list_videos();
  CHECK(list.status == 200);
  const auto lj = json::parse(list.body);
  REQUIRE(lj["videos"].size() == 6);
  CHECK(lj["videos"][1]["frames"] == 40);

  auto fr = svc.frame(vid, "3");
  CHECK(fr.status == 200);
  const auto fj = json::parse(fr.body);
  CHECK(fj["width"] == 96);
  CHECK(fj["height"] == 96);
  CHECK(fj["encoding"] == "base64-gray8");
  const auto pixels = fj["pixels"].get<std::string>();
  CHECK(pixels.size() == (96 * 96 + 2) / 3 * 4);
  const auto img = load_pgm(*manifest.videos[1].frames_dir / frame_file_name(3));
  CHECK(decode_base64(pixels) == std::string(img.pixels.begin(), img.pixels.end()));

  CHECK(svc.frame(vid, "40").status == 404);
  CHECK(svc.frame(vid, "-1").status == 404);
  CHECK(svc.frame(vid, "abc").status == 404);
  CHECK(svc.frame("nope", "0").status == 404);
  CHECK(svc.landmarks("nope").status == 404);
  CHECK(svc.get_labels("nope").status == 404);
  CHECK(json::parse(svc.landmarks(vid).body)["frames"].size() == 40);

  const auto g = json::parse(svc.get_labels(vid).body);
  std::string version = g["version"];
  CHECK(g["labels"].size() == 40);

  auto bad = labels_payload(version, 40);
  bad["labels"][5]["on_head"] = 0;
  bad["labels"][5]["nose"] = 1;
  auto numeric = labels_payload(version, 40);
  numeric["labels"][2]["on_head"] = 1;
  numeric["labels"][2]["eyes"] = 1;
  CHECK(svc.post_labels(vid, bad.dump()).status == 422);
  CHECK(svc.post_labels(vid, "{not json").status == 400);
  auto no_token = labels_payload(version, 40);
  no_token.erase("version");
  CHECK(svc.post_labels(vid, no_token.dump()).status == 409);
  CHECK(svc.post_labels(vid, labels_payload("stale", 40).dump()).status == 409);
  CHECK(svc.post_labels("nope", labels_payload(version, 40).dump()).status == 404);

  // Numeric 0/1 flags are accepted as well.
  CHECK(svc.post_labels(vid, numeric.dump()).status == 200);
  version = json::parse(svc.get_labels(vid).body)["version"];
  const auto payload = labels_payload(version, 40);
  const auto ok = svc.post_labels(vid, payload.dump());
  CHECK(ok.status == 200);
  const std::string new_version = json::parse(ok.body)["version"];
  CHECK(new_version != version);
  // The old token is now stale.
  CHECK(svc.post_labels(vid, payload.dump()).status == 409);

  const auto after = json::parse(svc.get_labels(vid).body);
  CHECK(after["version"] == new_version);
  REQUIRE(after["labels"].size() == 40);
  for (std::size_t f = 0; f < 40; ++f) {
    for (const char* key : {"frame_index", "on_head", "eyes", "ears", "nose", "mouth", "cheeks"}) {
      CHECK(after["labels"][f][key] == payload["labels"][f][key]);
    }
  }
  const auto disk = load_labels(svc.labels_path(vid));
  REQUIRE(disk.size() == 40);
  CHECK(disk[8].region(Region::Nose));
  CHECK(disk[4].region(Region::Mouth));
  CHECK_FALSE(disk[5].on_head);

  CHECK(slurp(manifest.videos[1].landmarks_path) == landmark_before);
  CHECK(slurp(*manifest.videos[1].frames_dir / frame_file_name(3)) == frame_before);
}

TEST_CASE("annotation service over HTTP") {
  const auto dir = fixture::temp_dir("cli_http");
  fs::copy(corpus(), dir, fs::copy_options::recursive | fs::copy_options::overwrite_existing);
  AnnotationService svc(load_manifest(dir / "manifest.json"));
  httplib::Server server;
  svc.mount(server);
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread worker([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  httplib::Client client("127.0.0.1", port);
  auto list = client.Get("/api/videos");
  REQUIRE(list);
  CHECK(list->status == 200);
  auto missing = client.Get("/api/videos/vid_000/frames/999");
  REQUIRE(missing);
  CHECK(missing->status == 404);
  auto labels = client.Get("/api/videos/vid_000/labels");
  REQUIRE(labels);
  const std::string version = json::parse(labels->body)["version"];
  auto post = client.Post("/api/videos/vid_000/labels", labels_payload(version, 40).dump(), "application/json");
  REQUIRE(post);
  CHECK(post->status == 200);
  auto conflict = client.Post("/api/videos/vid_000/labels", labels_payload(version, 40).dump(), "application/json");
  REQUIRE(conflict);
  CHECK(conflict->status == 409);

  server.stop();
  worker.join();
}

TEST_CASE("command-line tool exit codes") {
  const auto dir = fixture::temp_dir("cli_tool");
  const std::string tool = FACETOUCH_TOOL;
  const auto run = [&](const std::string& args) {
    const int status = std::system((tool + " " + args + " 2> " + (dir / "err.txt").string()).c_str());
    return WEXITSTATUS(status);
  };
  CHECK(run("synth --out " + (dir / "data").string() + " --videos 2 --frames 10 --no-render") == 0);
  CHECK(fs::exists(dir / "data" / "manifest.json"));
  CHECK(run("extract --manifest " + (dir / "data").string() + " --out " + (dir / "f.csv").string()) == 0);
  CHECK(read_feature_matrix(dir / "f.csv").rows() == 20);
  CHECK(run("extract --manifest " + (dir / "missing").string() + " --out " + (dir / "g.csv").string()) == 2);
  CHECK(slurp(dir / "err.txt").find("error[MissingFile]") != std::string::npos);
  CHECK(run("bogus") != 0);
}
