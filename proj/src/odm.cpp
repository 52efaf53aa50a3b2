#include "rescuesim/odm.hpp"

#include "rescuesim/errors.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

namespace rescuesim::odm {

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& o) {
  tp += o.tp;
  fp += o.fp;
  fn += o.fn;
  tn += o.tn;
  return *this;
}

const std::vector<DatasetDescriptor>& shipped_datasets() {
  static const std::vector<DatasetDescriptor> kDatasets{
      {"D1", "Fast-moving blurred objects", "Fast movement detection"},
      {"D2", "Fast and Slow rotation of an object", "Expend the frame rate for the model"},
      {"D3", "Same object with small and large size", "Correct the error rate for mismatch detection"},
      {"D4", "Lower pixel image", "Improve the partial translation rate"},
  };
  return kDatasets;
}

DatasetDescriptor descriptor_for(const std::string& id) {
  for (const auto& d : shipped_datasets()) {
    if (d.id == id) return d;
  }
  return {id, "", ""};
}

ConfusionCounts accumulate(const std::vector<DetectionRecord>& records) {
  if (records.empty()) throw EmptyInputError("detection log is empty");
  ConfusionCounts c;
  for (const auto& r : records) {
    if (r.ground_truth && r.prediction) {
      if (*r.ground_truth == *r.prediction) {
        ++c.tp;
      } else {
        // wrong label: a false alarm and a miss
        ++c.fp;
        ++c.fn;
      }
    } else if (r.prediction) {
      ++c.fp;
    } else if (r.ground_truth) {
      ++c.fn;
    } else {
      ++c.tn;
    }
  }
  return c;
}

namespace {

void require_valid(const ConfusionCounts& c) {
  if (c.tp < 0 || c.fp < 0 || c.fn < 0 || c.tn < 0) {
    throw ValidationError("confusion counts must be non-negative");
  }
}

double ratio(std::int64_t num, std::int64_t den, const char* name) {
  if (den == 0) throw UndefinedMetricError(std::string(name) + " is undefined: zero denominator");
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

double recall(const ConfusionCounts& c) {
  require_valid(c);
  return ratio(c.tp, c.tp + c.fn, "recall");
}

double precision(const ConfusionCounts& c) {
  require_valid(c);
  return ratio(c.tp, c.tp + c.fp, "precision");
}

double map_metric(const ConfusionCounts& c) {
  require_valid(c);
  return ratio(c.tp + c.tn, c.tp + c.fn + c.tn + c.fp, "MAP");
}

double f1(const ConfusionCounts& c) {
  const double p = precision(c);
  const double r = recall(c);
  if (p + r == 0.0) throw UndefinedMetricError("F1 is undefined: precision + recall = 0");
  return 2.0 * (p * r) / (p + r);
}

double avg_fps(const std::vector<DetectionRecord>& records) {
  if (records.empty()) throw EmptyInputError("detection log is empty");
  double sum = 0.0;
  for (const auto& r : records) {
    if (!(r.latency_ms > 0.0)) throw ValidationError("latency_ms must be positive");
    sum += r.latency_ms;
  }
  return 1000.0 / (sum / static_cast<double>(records.size()));
}

namespace {

template <typename F>
std::optional<double> defined(F&& metric, const ConfusionCounts& c) {
  try {
    return metric(c);
  } catch (const UndefinedMetricError&) {
    return std::nullopt;
  }
}

void append_rows(MetricReport& report, const std::string& id, const ConfusionCounts& c,
                 double fps) {
  const auto acc = defined(map_metric, c);
  const std::optional<double> acc_pct = acc ? std::optional(*acc * 100.0) : std::nullopt;
  report.rows.push_back({id, "Recall", defined(recall, c), fps, acc_pct});
  report.rows.push_back({id, "Precision", defined(precision, c), fps, acc_pct});
  report.rows.push_back({id, "MAP", acc, fps, acc_pct});
  report.rows.push_back({id, "F1", defined(f1, c), fps, acc_pct});
  report.counts[id] = c;
}

}  // namespace

MetricReport evaluate(const std::vector<DatasetLog>& logs) {
  MetricReport report;
  std::vector<DetectionRecord> all;
  std::set<std::string> seen;
  for (const auto& log : logs) {
    if (log.records.empty()) continue;
    if (!seen.insert(log.descriptor.id).second) {
      throw ValidationError("duplicate dataset id " + log.descriptor.id);
    }
    append_rows(report, log.descriptor.id, accumulate(log.records), avg_fps(log.records));
    all.insert(all.end(), log.records.begin(), log.records.end());
  }
  if (all.empty()) throw EmptyInputError("evaluate needs at least one non-empty log");
  append_rows(report, kOverallDataset, accumulate(all), avg_fps(all));
  return report;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::optional<std::string> label_field(const std::string& s, const std::string& line) {
  const std::string t = trim(s);
  if (t.empty()) throw ParseError("empty label field (use '-' for absent)", line);
  if (t == "-") return std::nullopt;
  return t;
}

}  // namespace

DatasetLog read_log(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("missing odmlog header", "");
  std::istringstream hs(line);
  std::string magic, version, id;
  if (!(hs >> magic >> version >> id) || magic != "odmlog" || version != "v1") {
    throw ParseError("bad odmlog header", line);
  }
  DatasetLog log;
  log.descriptor = descriptor_for(id);
  std::set<std::int64_t> frames;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ls(line);
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (fields.size() != 4) throw ParseError("expected 4 comma-separated fields", line);
    DetectionRecord r;
    const std::string fid = trim(fields[0]);
    auto [p, ec] = std::from_chars(fid.data(), fid.data() + fid.size(), r.frame_id);
    if (ec != std::errc() || p != fid.data() + fid.size()) throw ParseError("bad frame_id", line);
    r.ground_truth = label_field(fields[1], line);
    r.prediction = label_field(fields[2], line);
    try {
      size_t used = 0;
      const std::string lat = trim(fields[3]);
      r.latency_ms = std::stod(lat, &used);
      if (used != lat.size()) throw ParseError("bad latency", line);
    } catch (const std::logic_error&) {
      throw ParseError("bad latency", line);
    }
    if (!(r.latency_ms > 0.0) || !std::isfinite(r.latency_ms)) {
      throw ParseError("latency_ms must be positive", line);
    }
    if (!frames.insert(r.frame_id).second) throw ParseError("duplicate frame_id", line);
    log.records.push_back(std::move(r));
  }
  return log;
}

DatasetLog load_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open detection log " + path);
  return read_log(in);
}

namespace {
std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
}  // namespace

void write_log(std::ostream& out, const DatasetLog& log) {
  out << "odmlog v1 " << log.descriptor.id << '\n';
  for (const auto& r : log.records) {
    out << r.frame_id << ',' << r.ground_truth.value_or("-") << ','
        << r.prediction.value_or("-") << ',' << num(r.latency_ms) << '\n';
  }
}

void write_report(std::ostream& out, const MetricReport& report) {
  auto fmt = [](const std::optional<double>& v, const char* f) -> std::string {
    if (!v) return "undefined";
    char buf[64];
    std::snprintf(buf, sizeof buf, f, *v);
    return buf;
  };
  out << "dataset,metric,score,avg_fps,accuracy_pct\n";
  for (const auto& r : report.rows) {
    out << r.dataset << ',' << r.metric << ',' << fmt(r.score, "%.4f") << ','
        << fmt(r.avg_fps, "%.2f") << ',' << fmt(r.accuracy_pct, "%.2f") << '\n';
  }
}

}  // namespace rescuesim::odm
