#include "brp/evaluation.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "brp/io.hpp"
#include "brp/proposals.hpp"
#include "brp/training.hpp"

namespace brp {

namespace fs = std::filesystem;

MetricReport evaluate_maps(const std::vector<std::pair<std::string, InstanceMap>>& gt,
                           const std::vector<std::pair<std::string, InstanceMap>>& pred,
                           F1Criterion criterion) {
  std::map<std::string, const InstanceMap*> by_stem;
  for (const auto& [stem, m] : pred) by_stem[stem] = &m;
  if (by_stem.size() != pred.size()) throw std::invalid_argument("evaluate: duplicate prediction stems");
  std::vector<ImageMetrics> rows;
  for (const auto& [stem, g] : gt) {
    auto it = by_stem.find(stem);
    if (it == by_stem.end()) throw std::invalid_argument("evaluate: no prediction for '" + stem + "'");
    rows.push_back(compute_image_metrics(stem, g, *it->second, criterion));
    by_stem.erase(it);
  }
  if (!by_stem.empty()) {
    throw std::invalid_argument("evaluate: prediction '" + by_stem.begin()->first + "' has no ground truth");
  }
  return make_report(std::move(rows));
}

MetricReport evaluate_dirs(const fs::path& pred_dir, const fs::path& gt_dir, F1Criterion criterion) {
  return evaluate_maps(load_label_dir(gt_dir), load_label_dir(pred_dir), criterion);
}

std::string format_report(const MetricReport& report) {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed;
  auto line = [&os](const ImageMetrics& m) {
    os << m.stem << '\t' << m.aji << '\t' << m.f1 << '\t' << m.dice1 << '\t' << m.dice2 << '\n';
  };
  for (const auto& m : report.images) line(m);
  line(report.aggregate);
  return os.str();
}

void write_report(const fs::path& path, const MetricReport& report) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write report " + path.string());
  out << format_report(report);
}

MetricReport parse_report(const std::string& text) {
  MetricReport r;
  std::istringstream in(text);
  std::string line;
  bool have_aggregate = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    ImageMetrics m;
    std::getline(ls, m.stem, '\t');
    if (!(ls >> m.aji >> m.f1 >> m.dice1 >> m.dice2)) throw std::invalid_argument("malformed report line: " + line);
    if (m.stem == "AGGREGATE") {
      r.aggregate = m;
      have_aggregate = true;
    } else {
      r.images.push_back(m);
    }
  }
  if (!have_aggregate) throw std::invalid_argument("report has no AGGREGATE line");
  return r;
}

// ---------------------------------------------------------------------------

std::vector<SweepRow> sweep_dilation_radius(Stage1Model& stage1, Stage2Pair& stage2,
                                            const std::vector<Sample>& eval, const std::vector<int>& radii) {
  if (eval.empty()) throw std::invalid_argument("sweep: empty evaluation set");
  std::vector<RgbImage> normalized;
  std::vector<ProbabilityPair> probs;
  for (const auto& s : eval) {
    normalized.push_back(stage1.norm.apply(s.image));
    probs.push_back(predict_probabilities(stage1.net, normalized.back()));
  }
  std::vector<SweepRow> rows;
  for (int radius : radii) {
    auto pp = stage1.postproc;
    pp.dilation_radius = radius;
    pp.validate();
    SweepRow row;
    row.value = std::to_string(radius);
    for (std::size_t i = 0; i < eval.size(); ++i) {
      const auto proposals = propose(probs[i], pp);
      row.aji_stage1 += aji(eval[i].instances, proposals);
      row.aji_pipeline += aji(eval[i].instances, refine_proposals(normalized[i], probs[i], proposals, stage2));
    }
    row.aji_stage1 /= static_cast<double>(eval.size());
    row.aji_pipeline /= static_cast<double>(eval.size());
    rows.push_back(row);
  }
  return rows;
}

std::vector<SweepRow> sweep_stage2_param(Stage1Model& stage1, const std::vector<Sample>& train,
                                         const std::vector<Sample>& eval, const TrainConfig& cfg,
                                         const std::string& param, const std::vector<std::string>& values) {
  if (param != "tau" && param != "stage2_loss") {
    throw std::invalid_argument("sweep: unknown parameter '" + param + "'");
  }
  if (eval.empty()) throw std::invalid_argument("sweep: empty evaluation set");
  std::vector<SweepRow> rows;
  for (const auto& value : values) {
    TrainConfig c = cfg;
    apply_key_values(c, {{param == "tau" ? "stage2.tau" : "stage2.loss", value}});
    auto s2 = train_stage2(stage1, train, c);
    SweepRow row;
    row.value = value;
    for (const auto& s : eval) {
      const auto res = infer_image(stage1, &s2.nets, s.image);
      row.aji_stage1 += aji(s.instances, res.proposals);
      row.aji_pipeline += aji(s.instances, res.instances);
    }
    row.aji_stage1 /= static_cast<double>(eval.size());
    row.aji_pipeline /= static_cast<double>(eval.size());
    rows.push_back(row);
  }
  return rows;
}

std::string format_sweep(const std::string& param, const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed << param << "\taji_stage1\taji_pipeline\n";
  for (const auto& r : rows) os << r.value << '\t' << r.aji_stage1 << '\t' << r.aji_pipeline << '\n';
  return os.str();
}

double spread(const std::vector<SweepRow>& rows, bool pipeline) {
  if (rows.empty()) return 0.0;
  auto key = [pipeline](const SweepRow& r) { return pipeline ? r.aji_pipeline : r.aji_stage1; };
  double lo = key(rows.front()), hi = lo;
  for (const auto& r : rows) {
    lo = std::min(lo, key(r));
    hi = std::max(hi, key(r));
  }
  return hi - lo;
}

}  // namespace brp
