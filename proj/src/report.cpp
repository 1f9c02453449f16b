#include <cstdio>

#include <json.hpp>

#include "posefuse/dataio.hpp"

namespace posefuse {

namespace {

using json = nlohmann::ordered_json;

json stats_json(const Stats& s) {
  return {{"mean", s.mean}, {"median", s.median}, {"max", s.max}};
}

std::string threshold_name(const PoseThreshold& t) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%gdeg_%gcm", t.deg, t.cm);
  return buf;
}

}  // namespace

std::string report_json(const EvaluationReport& r) {
  json j;
  j["ate_mm"] = stats_json(r.ate_mm);
  j["rpe_rot_deg"] = stats_json(r.rpe_rot_deg);
  j["rpe_trans_mm"] = stats_json(r.rpe_trans_mm);
  if (r.add) {
    j["add_auc"] = r.add->add_auc;
    j["adds_auc"] = r.add->adds_auc;
    j["add_01d"] = r.add->add_01d;
    j["adds_01d"] = r.add->adds_01d;
  }
  if (r.iou) {
    j["iou_recalls"] = {{"25", r.iou->recall25}, {"50", r.iou->recall50}, {"75", r.iou->recall75}};
  }
  json recalls = json::object();
  for (size_t i = 0; i < r.thresholds.size() && i < r.pose_recalls.size(); ++i) {
    recalls[threshold_name(r.thresholds[i])] = r.pose_recalls[i];
  }
  j["pose_recalls"] = recalls;
  return j.dump(2) + "\n";
}

std::string report_table(const EvaluationReport& r) {
  std::string out;
  char buf[160];
  const auto row = [&](const char* name, const Stats& s) {
    std::snprintf(buf, sizeof(buf), "%-16s %12.4f %12.4f %12.4f\n", name, s.mean, s.median, s.max);
    out += buf;
  };
  std::snprintf(buf, sizeof(buf), "%-16s %12s %12s %12s\n", "metric", "mean", "median", "max");
  out += buf;
  row("ATE (mm)", r.ate_mm);
  row("RPE rot (deg)", r.rpe_rot_deg);
  row("RPE trans (mm)", r.rpe_trans_mm);
  if (r.add) {
    std::snprintf(buf, sizeof(buf),
                  "ADD AUC %.2f%%  ADD-S AUC %.2f%%  ADD-0.1d %.2f%%  ADD-S-0.1d %.2f%%\n",
                  r.add->add_auc, r.add->adds_auc, r.add->add_01d, r.add->adds_01d);
    out += buf;
  }
  if (r.iou) {
    std::snprintf(buf, sizeof(buf), "IoU>0.25 %.2f%%  IoU>0.50 %.2f%%  IoU>0.75 %.2f%%\n",
                  r.iou->recall25, r.iou->recall50, r.iou->recall75);
    out += buf;
  }
  for (size_t i = 0; i < r.thresholds.size() && i < r.pose_recalls.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%gdeg %gcm: %.2f%%\n", r.thresholds[i].deg, r.thresholds[i].cm,
                  r.pose_recalls[i]);
    out += buf;
  }
  return out;
}

}  // namespace posefuse
