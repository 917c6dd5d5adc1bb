#include <doctest.h>

#include <fstream>
#include <json.hpp>
#include <map>
#include <numeric>
#include <set>

#include "facetouch/eval/report.hpp"
#include "facetouch/pipeline/pipeline.hpp"
#include "support/datasets.hpp"
#include "support/fixtures.hpp"

using namespace facetouch;
using fixture::error_of;

namespace {

std::vector<std::string> ids(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("vid" + std::to_string(i));
  return out;
}

const FeatureMatrix& small_data() {
  static const FeatureMatrix m = fixture::synth_matrix(10, 60, 21);
  return m;
}

PipelineSpec quick_spec(Variant v = Variant::RfPcaSvm, Task t = Task::BinaryTouch) {
  PipelineSpec s;
  s.variant = v;
  s.task = t;
  s.seed = 3;
  s.forest.n_trees = 15;
  s.grid.pca_thresholds = {0.95};
  s.grid.latent_sizes = {8};
  s.grid.epochs = {5};
  s.grid.C = {1.0, 10.0};
  s.grid.gammas = {std::nullopt};
  return s;
}

std::size_t accuracy_hits(const std::vector<bool>& p, const FeatureMatrix& m) {
  std::size_t hit = 0;
  for (std::size_t i = 0; i < p.size(); ++i) hit += p[i] == m.labels[i]->on_head;
  return hit;
}

}  // namespace

TEST_CASE("grouped folds") {
  const auto f25 = make_grouped_folds(ids(25), 5, 1);
  for (std::size_t k = 0; k < 5; ++k) CHECK(f25.videos_in(k).size() == 5);

  const auto f23 = make_grouped_folds(ids(23), 5, 1);
  std::multiset<std::size_t> sizes;
  std::set<std::string> seen;
  for (std::size_t k = 0; k < 5; ++k) {
    const auto v = f23.videos_in(k);
    sizes.insert(v.size());
    for (const auto& id : v) CHECK(seen.insert(id).second);
  }
  CHECK(sizes == std::multiset<std::size_t>{4, 4, 5, 5, 5});
  CHECK(seen.size() == 23);

  // Row-level ids collapse to distinct videos.
  std::vector<std::string> rows;
  for (const auto& id : ids(6))
    for (int r = 0; r < 4; ++r) rows.push_back(id);
  CHECK(make_grouped_folds(rows, 5, 2).videos.size() == 6);

  CHECK(make_grouped_folds(ids(23), 5, 1).videos == f23.videos);
  CHECK(make_grouped_folds(ids(23), 5, 2).videos != f23.videos);
  CHECK(error_of([] { make_grouped_folds(ids(3), 5, 0); }) == ErrorCode::TooFewGroups);
}

TEST_CASE("grid enumeration") {
  PipelineSpec rf;
  const auto g = enumerate_grid(rf);
  CHECK(g.size() == 36);
  CHECK(g[0].pca_threshold == 0.90);
  CHECK(g[0].C == 0.1);
  CHECK_FALSE(g[0].gamma.has_value());
  CHECK(g[1].gamma == 0.01);
  CHECK(g[3].C == 1.0);
  CHECK(g[12].pca_threshold == 0.95);

  PipelineSpec ae;
  ae.variant = Variant::AutoencSvmI;
  const auto a = enumerate_grid(ae);
  CHECK(a.size() == 72);
  CHECK(a[0].latent == 16);
  CHECK(a[0].epochs == 50);
  CHECK(a[12].epochs == 100);
  CHECK(a[24].latent == 32);

  CHECK(variant_from_name(variant_name(Variant::AutoencSvmII)) == Variant::AutoencSvmII);
  CHECK(task_from_name("multilabel") == Task::MultiLabelRegions);
  CHECK(error_of([] { variant_from_name("svm"); }).has_value());
}

TEST_CASE("pipeline column sets") {
  const auto with_hog = build_manifest(true);
  CHECK(pipeline_columns(Variant::RfPcaSvm, with_hog).size() == kNonHogFeatureCount);
  CHECK(pipeline_columns(Variant::AutoencSvmI, with_hog).size() == kNonHogFeatureCount);
  CHECK(pipeline_columns(Variant::AutoencSvmII, with_hog).size() == with_hog.size());

  PipelineSpec s;
  s.variant = Variant::AutoencSvmII;
  CHECK(error_of([&] { prepare_training(s, small_data()); }) == ErrorCode::InvalidArgument);

  FeatureMatrix unlabeled = small_data();
  unlabeled.labels[4].reset();
  CHECK(error_of([&] { prepare_training(PipelineSpec{}, unlabeled); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("multi-label training keeps only on-head rows") {
  PipelineSpec s;
  s.task = Task::MultiLabelRegions;
  const auto p = prepare_training(s, small_data());
  std::size_t on_head = 0;
  for (const auto& l : small_data().labels) on_head += l->on_head;
  CHECK(p.rows() == on_head);
  for (const auto& l : p.labels) CHECK(l->on_head);
  const auto t = task_targets(Task::MultiLabelRegions, p);
  CHECK(t.size() == p.rows());
  CHECK(*std::min_element(t.begin(), t.end()) == 0);

  const auto bin = task_targets(Task::BinaryTouch, small_data());
  CHECK(std::accumulate(bin.begin(), bin.end(), std::size_t(0)) == on_head);
}

TEST_CASE("grid search ties keep the earlier configuration") {
  auto s = quick_spec();
  s.grid.C = {1.0, 1.0, 1.0};
  const auto prepared = prepare_training(s, small_data());
  const auto folds = make_grouped_folds(prepared.video_ids, 5, s.seed);
  const auto r = grid_search(s, prepared, folds);
  REQUIRE(r.table.size() == 3);
  CHECK(r.table[0].mean_score == r.table[2].mean_score);
  CHECK(r.best == 0);
  for (const auto& row : r.table) {
    CHECK(row.fold_scores.size() == 5);
    CHECK_FALSE(row.failed);
  }
}

TEST_CASE("fold stages never see validation rows") {
  for (Variant v : {Variant::RfPcaSvm, Variant::AutoencSvmI}) {
    const auto s = quick_spec(v);
    const auto prepared = prepare_training(s, small_data());
    const auto folds = make_grouped_folds(prepared.video_ids, 5, s.seed);
    const auto base = fit_fold_stages(s, prepared, folds, 1);
    const auto val_videos = folds.videos_in(1);
    const std::set<std::string> val_set(val_videos.begin(), val_videos.end());
    CHECK(base.validation_rows == prepared.rows_of_videos(val_videos));
    for (std::size_t r : base.train_rows) CHECK(val_set.count(prepared.video_ids[r]) == 0);

    FeatureMatrix perturbed = prepared;
    Rng rng = make_rng(77);
    for (std::size_t r : base.validation_rows) {
      for (Eigen::Index c = 0; c < perturbed.values.cols(); c += 3) perturbed.values(Eigen::Index(r), c) = normal(rng, 50, 20);
      perturbed.labels[r]->on_head = !perturbed.labels[r]->on_head;
      perturbed.labels[r]->regions = {};
    }
    const auto again = fit_fold_stages(s, perturbed, folds, 1);
    CHECK(serialize_stages(again) == serialize_stages(base));

    // A training-row perturbation does reach the statistics.
    FeatureMatrix touched = prepared;
    touched.values(Eigen::Index(base.train_rows[0]), 0) += 1000;
    CHECK(serialize_stages(fit_fold_stages(s, touched, folds, 1)) != serialize_stages(base));
  }
}

TEST_CASE("fit is deterministic and the model round-trips") {
  const auto split = split_by_video(small_data(), 4);
  auto s = quick_spec();
  const auto m = fit(s, split.first);
  CHECK(m.cv_table.size() == 2);
  CHECK(m.svm.has_value());
  CHECK(m.pca_components > 0);
  CHECK(model_to_string(fit(s, split.first)) == model_to_string(m));

  const auto pred = predict(m, split.second);
  CHECK(pred.on_head.size() == split.second.rows());
  const auto dir = fixture::temp_dir("pipeline");
  save_model(m, dir / "m.json");
  const auto loaded = load_model(dir / "m.json");
  CHECK(predict(loaded, split.second).on_head == pred.on_head);
  CHECK(model_to_string(loaded) == model_to_string(m));

  // The model beats predicting the majority class on held-out videos.
  std::size_t majority = 0;
  for (const auto& l : split.second.labels) majority += l->on_head == m.zeror_on_head;
  CHECK(accuracy_hits(pred.on_head, split.second) > majority);

  const std::string text = model_to_string(m);
  CHECK(error_of([&] { model_from_string(text.substr(0, text.size() / 2)); }) == ErrorCode::CorruptModel);
  {
    std::ofstream out(dir / "trunc.json");
    out << text.substr(0, text.size() - 40);
  }
  CHECK(error_of([&] { load_model(dir / "trunc.json"); }) == ErrorCode::CorruptModel);
  std::string future = text;
  future.replace(future.find("\"version\": 1"), 12, "\"version\": 7");
  CHECK(error_of([&] { model_from_string(future); }) == ErrorCode::VersionMismatch);
  CHECK(error_of([] { model_from_string("{\"format\": \"other\"}"); }) == ErrorCode::CorruptModel);

  FeatureMatrix wider(build_manifest(true), 2);
  CHECK(error_of([&] { predict(m, wider); }) == ErrorCode::ManifestFingerprintMismatch);
}

TEST_CASE("autoencoder and multi-label models") {
  const auto split = split_by_video(small_data(), 5);
  const auto ae = fit_with(quick_spec(Variant::AutoencSvmI), split.first, Hyperparameters{0.0, 8, 5, 1.0, std::nullopt});
  CHECK(ae.autoencoder.has_value());
  CHECK(ae.autoencoder->latent_dim == 8);
  const auto p = predict(ae, split.second);
  CHECK(predict(model_from_string(model_to_string(ae)), split.second).on_head == p.on_head);

  // Some videos have no on-head frames, so fewer groups remain.
  auto mls = quick_spec(Variant::RfPcaSvm, Task::MultiLabelRegions);
  mls.folds = 2;
  const auto ml = fit(mls, split.first);
  CHECK(ml.powerset.has_value());
  const auto mp = predict(ml, split.second);
  CHECK(mp.regions.size() == split.second.rows());
  CHECK(predict(model_from_string(model_to_string(ml)), split.second).regions == mp.regions);
  std::map<int, std::size_t> counts;
  for (const auto& l : split.first.labels)
    if (l->on_head) ++counts[int(l->region_code())];
  std::size_t most = 0;
  for (const auto& [code, n] : counts) most = std::max(most, n);
  CHECK(counts[ml.zeror_code] == most);
}

TEST_CASE("split by video") {
  const auto s = split_by_video(small_data(), 9);
  const auto a = s.first.distinct_videos();
  const auto b = s.second.distinct_videos();
  CHECK(a.size() == 5);
  CHECK(b.size() == 5);
  for (const auto& id : a) CHECK(std::find(b.begin(), b.end(), id) == b.end());
  CHECK(s.first.rows() + s.second.rows() == small_data().rows());
  CHECK(split_by_video(small_data(), 9).first.video_ids == s.first.video_ids);
}

TEST_CASE("evaluation report layout") {
  const auto split = split_by_video(small_data(), 6);
  const auto m = fit_with(quick_spec(), split.first, Hyperparameters{0.95, 0, 0, 1.0, std::nullopt});
  FeatureMatrix unlabeled = split.second;
  unlabeled.labels.clear();
  const auto rep = build_report({{"held-out", &split.second, {{"rf", &m}}}, {"no labels", &unlabeled, {{"rf", &m}}}}, 11);
  REQUIRE(rep.configurations.size() == 2);
  const auto& c = rep.configurations[0];
  REQUIRE(c.rows.size() == 3);
  CHECK(c.rows[0].method == "Zero Rule");
  CHECK(c.rows[1].method == "Random chance");
  CHECK(c.rows[1].analytic);
  CHECK(c.rows[1].accuracy == 0.5);
  CHECK(c.rows[1].precision == doctest::Approx(c.prevalence));
  CHECK(c.rows[2].method == "rf");
  CHECK(c.rows[2].vs_zeror.has_value());
  CHECK(c.rows[2].vs_random.has_value());
  CHECK(c.test_rows == split.second.rows());
  CHECK(rep.configurations[1].skipped);
  CHECK_FALSE(rep.configurations[1].notice.empty());

  const auto text = report_to_text(rep);
  CHECK(text.find("Accuracy") != std::string::npos);
  CHECK(text.find("Precision On Head") != std::string::npos);
  CHECK(text.find("skipped") != std::string::npos);
  const auto j = nlohmann::json::parse(report_to_json(rep));
  CHECK(j["configurations"].size() == 2);
}
