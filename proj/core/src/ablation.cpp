#include "mccsod/ablation.hpp"

#include <cstdio>
#include <sstream>

#include <torch/torch.h>

#include "mccsod/errors.hpp"

namespace mccsod {

std::vector<AblationVariant> ablation_variants(AblationStudy study, const NetworkConfig& base,
                                               const LossOptions& base_loss) {
  std::vector<AblationVariant> out;
  auto add = [&](MccmConfig m, LossOptions loss, std::string label = {}) {
    AblationVariant v;
    v.number = static_cast<int>(out.size()) + 1;
    v.network = base;
    v.network.mccm = m;
    v.loss = loss;
    v.label = label.empty() ? m.label() : std::move(label);
    out.push_back(std::move(v));
  };

  switch (study) {
    case AblationStudy::kContent: {
      // {foreground, edge, background, global}
      const bool rows[10][4] = {{0, 0, 0, 0}, {1, 0, 0, 0}, {1, 1, 0, 0}, {1, 1, 1, 0}, {0, 1, 0, 0},
                                {0, 0, 0, 1}, {1, 0, 0, 1}, {0, 1, 0, 1}, {1, 1, 0, 1}, {1, 1, 1, 1}};
      for (const auto& r : rows) add(MccmConfig{r[0], r[1], r[2], r[3], true}, base_loss);
      break;
    }
    case AblationStudy::kOriginalContent: {
      auto without = MccmConfig::full();
      without.short_connection = false;
      add(without, base_loss, "w/o original content");
      add(MccmConfig::full(), base_loss, "w/ original content");
      break;
    }
    case AblationStudy::kLoss: {
      const bool rows[4][2] = {{false, false}, {true, false}, {false, true}, {true, true}};
      const char* labels[4] = {"BCE", "BCE+IoU", "BCE+F-m", "BCE+IoU+F-m"};
      for (int i = 0; i < 4; ++i) {
        auto loss = base_loss;
        loss.use_bce = true;
        loss.use_iou = rows[i][0];
        loss.use_fmeasure = rows[i][1];
        add(MccmConfig::full(), loss, labels[i]);
      }
      break;
    }
  }
  return out;
}

MetricReport evaluate_samples(MccNet& net, const SampleSource& data) {
  if (data.size == 0) throw EmptyManifestError("evaluation set is empty");
  Predictor predictor(net);
  const auto dtype = net->parameters().front().scalar_type();
  std::vector<ImageMetrics> per_image;
  for (std::size_t i = 0; i < data.size; ++i) {
    auto s = data.load(i);
    auto pred = predictor.predict(s.image.unsqueeze(0).to(dtype));
    per_image.push_back(evaluate_image(tensor_to_mat(pred), tensor_to_mat(s.gt)));
  }
  return aggregate(per_image);
}

std::vector<AblationRow> run_ablation(const std::vector<AblationVariant>& variants, const TrainConfig& train,
                                      const SampleSource& train_data, const SampleSource& test_data,
                                      const std::function<void(const AblationRow&)>& on_row) {
  std::vector<AblationRow> rows;
  for (const auto& v : variants) {
    auto cfg = train;
    cfg.loss = v.loss;
    auto result = mccsod::train(v.network, cfg, train_data);
    AblationRow row;
    row.variant = v;
    row.parameters = parameter_count(*result.net);
    if (!result.log.steps.empty()) {
      row.first_loss = result.log.steps.front().loss.total;
      row.last_loss = result.log.steps.back().loss.total;
    }
    row.report = evaluate_samples(result.net, test_data);
    if (on_row) on_row(row);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string format_ablation_table(const std::vector<AblationRow>& rows, AblationStudy study) {
  std::ostringstream os;
  char buf[256];
  const bool content = study == AblationStudy::kContent;
  const bool loss = study == AblationStudy::kLoss;
  if (content)
    std::snprintf(buf, sizeof buf, "%-4s %-4s %-4s %-4s %-4s %-4s", "No.", "Base", "FG", "EG", "BG", "GIC");
  else if (loss)
    std::snprintf(buf, sizeof buf, "%-4s %-4s %-4s %-4s", "No.", "BCE", "IoU", "F-m");
  else
    std::snprintf(buf, sizeof buf, "%-24s", "Model");
  os << buf;
  std::snprintf(buf, sizeof buf, " %10s %8s %8s %8s %8s %10s %10s\n", "params", "F_max", "E_max", "S_alpha", "MAE",
                "loss@1", "loss@end");
  os << buf;

  auto mark = [](bool b) { return b ? "x" : ""; };
  for (const auto& r : rows) {
    const auto& m = r.variant.network.mccm;
    if (content)
      std::snprintf(buf, sizeof buf, "%-4d %-4s %-4s %-4s %-4s %-4s", r.variant.number, "x", mark(m.foreground),
                    mark(m.edge), mark(m.background), mark(m.global));
    else if (loss)
      std::snprintf(buf, sizeof buf, "%-4d %-4s %-4s %-4s", r.variant.number, mark(r.variant.loss.use_bce),
                    mark(r.variant.loss.use_iou), mark(r.variant.loss.use_fmeasure));
    else
      std::snprintf(buf, sizeof buf, "%-24s", r.variant.label.c_str());
    os << buf;
    std::snprintf(buf, sizeof buf, " %10lld %8.4f %8.4f %8.4f %8.4f %10.4f %10.4f\n",
                  static_cast<long long>(r.parameters), r.report.f_max, r.report.e_max, r.report.s_alpha,
                  r.report.mae, r.first_loss, r.last_loss);
    os << buf;
  }
  return os.str();
}

}  // namespace mccsod
