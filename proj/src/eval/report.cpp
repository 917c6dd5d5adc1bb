#include "facetouch/eval/report.hpp"

#include <cstdio>

#include <json.hpp>

#include "facetouch/core/error.hpp"

using json = nlohmann::json;

namespace facetouch {

namespace {

std::vector<bool> correct_of(const std::vector<bool>& pred, const std::vector<bool>& truth) {
  std::vector<bool> out(truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i) out[i] = pred[i] == truth[i];
  return out;
}

std::vector<bool> flatten(const std::vector<RegionFlags>& rows) {
  std::vector<bool> out;
  out.reserve(rows.size() * kRegionCount);
  for (const auto& r : rows) out.insert(out.end(), r.begin(), r.end());
  return out;
}

ConfigurationReport binary_configuration(const EvaluationConfig& cfg, std::uint64_t seed) {
  ConfigurationReport rep;
  rep.name = cfg.name;
  rep.task = Task::BinaryTouch;
  const FeatureMatrix& test = *cfg.test;
  std::vector<bool> truth(test.rows());
  for (std::size_t r = 0; r < test.rows(); ++r) truth[r] = test.labels[r]->on_head;
  rep.test_rows = truth.size();
  rep.prevalence = touch_frequency(truth);

  const bool zr = cfg.models.front().model->zeror_on_head;
  const std::vector<bool> zeror_pred(truth.size(), zr);
  const BinaryMetrics zm = binary_metrics(zeror_pred, truth);
  rep.rows.push_back({"Zero Rule", zm.accuracy, zm.precision, zm.recall, false, zm.precision_undefined, {}, {}});
  const ChanceMetrics cm = random_chance_expectation(rep.prevalence);
  rep.rows.push_back({"Random chance", cm.accuracy, cm.precision, cm.recall, true, false, {}, {}});

  const auto zeror_ok = correct_of(zeror_pred, truth);
  const auto random_ok = correct_of(random_predictions(truth.size(), seed), truth);
  for (const auto& nm : cfg.models) {
    const Predictions p = predict(*nm.model, test);
    const BinaryMetrics m = binary_metrics(p.on_head, truth);
    const auto ok = correct_of(p.on_head, truth);
    rep.rows.push_back({nm.name, m.accuracy, m.precision, m.recall, false, m.precision_undefined, mcnemar(ok, zeror_ok),
                        mcnemar(ok, random_ok)});
  }
  return rep;
}

ConfigurationReport multilabel_configuration(const EvaluationConfig& cfg, std::uint64_t seed) {
  ConfigurationReport rep;
  rep.name = cfg.name;
  rep.task = Task::MultiLabelRegions;
  const FeatureMatrix& all = *cfg.test;
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < all.rows(); ++r) {
    if (all.labels[r]->on_head) rows.push_back(r);
  }
  if (rows.empty()) {
    rep.skipped = true;
    rep.notice = "no on-head frames in the test set";
    return rep;
  }
  const FeatureMatrix test = all.select_rows(rows);
  std::vector<RegionFlags> truth(test.rows());
  for (std::size_t r = 0; r < test.rows(); ++r) truth[r] = test.labels[r]->regions;
  rep.test_rows = truth.size();
  const auto flat_truth = flatten(truth);
  rep.prevalence = touch_frequency(flat_truth);

  const std::vector<RegionFlags> zeror_pred(truth.size(), regions_from_code(unsigned(cfg.models.front().model->zeror_code)));
  const MultiLabelMetrics zm = multilabel_macro_metrics(zeror_pred, truth);
  rep.rows.push_back({"Zero Rule", zm.accuracy, zm.precision, zm.recall, false, false, {}, {}});
  double mean_prev = 0.0;
  for (std::size_t k = 0; k < kRegionCount; ++k) {
    std::size_t pos = 0;
    for (const auto& t : truth) pos += t[k];
    mean_prev += double(pos) / double(truth.size()) / double(kRegionCount);
  }
  rep.rows.push_back({"Random chance", 0.5, mean_prev, 0.5, true, false, {}, {}});

  const auto zeror_ok = correct_of(flatten(zeror_pred), flat_truth);
  const auto random_ok = correct_of(random_predictions(flat_truth.size(), seed), flat_truth);
  for (const auto& nm : cfg.models) {
    const Predictions p = predict(*nm.model, test);
    const MultiLabelMetrics m = multilabel_macro_metrics(p.regions, truth);
    const auto ok = correct_of(flatten(p.regions), flat_truth);
    rep.rows.push_back({nm.name, m.accuracy, m.precision, m.recall, false, false, mcnemar(ok, zeror_ok),
                        mcnemar(ok, random_ok)});
  }
  return rep;
}

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f%%", 100.0 * v);
  return buf;
}

std::string pvalue(const std::optional<McNemarResult>& m) {
  if (!m) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g%s", m->p_value, m->p_value < kSignificanceLevel ? " *" : "");
  return buf;
}

json mcnemar_json(const std::optional<McNemarResult>& m) {
  if (!m) return nullptr;
  return json{{"b", m->b},
              {"c", m->c},
              {"statistic", m->statistic},
              {"p_value", m->p_value},
              {"method", m->method == McNemarMethod::ExactBinomial ? "exact_binomial" : "chi_square_cc"},
              {"significant", m->p_value < kSignificanceLevel}};
}

}  // namespace

EvalReport build_report(const std::vector<EvaluationConfig>& configs, std::uint64_t random_seed) {
  EvalReport report;
  report.random_seed = random_seed;
  for (const auto& cfg : configs) {
    if (cfg.models.empty() || !cfg.test) throw Error(ErrorCode::InvalidArgument, "configuration " + cfg.name + " has no models");
    const Task task = cfg.models.front().model->spec.task;
    for (const auto& m : cfg.models) {
      if (m.model->spec.task != task) {
        throw Error(ErrorCode::InvalidArgument, "configuration " + cfg.name + " mixes binary and multi-label models");
      }
    }
    if (!cfg.test->fully_labeled() || cfg.test->rows() == 0) {
      ConfigurationReport skipped;
      skipped.name = cfg.name;
      skipped.task = task;
      skipped.skipped = true;
      skipped.notice = "test set lacks labels; configuration skipped";
      report.configurations.push_back(std::move(skipped));
      continue;
    }
    report.configurations.push_back(task == Task::BinaryTouch ? binary_configuration(cfg, random_seed)
                                                              : multilabel_configuration(cfg, random_seed));
  }
  return report;
}

std::string report_to_json(const EvalReport& report) {
  json j;
  j["random_seed"] = report.random_seed;
  j["significance_level"] = kSignificanceLevel;
  json configs = json::array();
  for (const auto& c : report.configurations) {
    json rows = json::array();
    for (const auto& r : c.rows) {
      rows.push_back({{"method", r.method},
                      {"accuracy", r.accuracy},
                      {"precision", r.precision},
                      {"recall", r.recall},
                      {"analytic", r.analytic},
                      {"precision_undefined", r.precision_undefined},
                      {"mcnemar_vs_zeror", mcnemar_json(r.vs_zeror)},
                      {"mcnemar_vs_random", mcnemar_json(r.vs_random)}});
    }
    configs.push_back({{"name", c.name},
                       {"task", task_name(c.task)},
                       {"skipped", c.skipped},
                       {"notice", c.notice},
                       {"test_rows", c.test_rows},
                       {"prevalence", c.prevalence},
                       {"rows", rows}});
  }
  j["configurations"] = configs;
  return j.dump(2) + "\n";
}

std::string report_to_text(const EvalReport& report) {
  std::string out;
  char line[256];
  for (const auto& c : report.configurations) {
    out += c.name + " [" + task_name(c.task) + "]\n";
    if (c.skipped) {
      out += "  skipped: " + c.notice + "\n\n";
      continue;
    }
    const bool bin = c.task == Task::BinaryTouch;
    std::snprintf(line, sizeof line, "  test frames: %zu, %s prevalence %s\n", c.test_rows,
                  bin ? "on-head" : "mean region", pct(c.prevalence).c_str());
    out += line;
    std::snprintf(line, sizeof line, "  %-22s %9s %20s %18s %16s %16s\n", "Method", "Accuracy",
                  bin ? "Precision On Head" : "Precision Key Area", bin ? "Recall On Head" : "Recall Key Area",
                  "McNemar p ZeroR", "McNemar p random");
    out += line;
    for (const auto& r : c.rows) {
      std::snprintf(line, sizeof line, "  %-22s %9s %20s %18s %16s %16s\n", r.method.c_str(), pct(r.accuracy).c_str(),
                    pct(r.precision).c_str(), pct(r.recall).c_str(), pvalue(r.vs_zeror).c_str(),
                    pvalue(r.vs_random).c_str());
      out += line;
    }
    out += "  (* p < 0.01)\n\n";
  }
  return out;
}

}  // namespace facetouch
