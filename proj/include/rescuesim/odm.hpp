#pragma once

// Detection evaluation: confusion counts from per-frame logs and the four
// reported metrics.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace rescuesim::odm {

struct ConfusionCounts {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  std::int64_t tn = 0;

  std::int64_t total() const { return tp + fp + fn + tn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o);
  friend ConfusionCounts operator+(ConfusionCounts a, const ConfusionCounts& b) { return a += b; }
  bool operator==(const ConfusionCounts&) const = default;
};

struct DetectionRecord {
  std::int64_t frame_id = 0;
  std::optional<std::string> ground_truth;
  std::optional<std::string> prediction;
  double latency_ms = 0.0;

  bool operator==(const DetectionRecord&) const = default;
};

struct DatasetDescriptor {
  std::string id;
  std::string nature;
  std::string testing_feature;
};

/// D1..D4 as published.
const std::vector<DatasetDescriptor>& shipped_datasets();
/// Looks up a shipped descriptor; unknown ids get empty text.
DatasetDescriptor descriptor_for(const std::string& id);

/// Throws EmptyInputError on an empty log.
ConfusionCounts accumulate(const std::vector<DetectionRecord>& records);

// Each throws UndefinedMetricError when its denominator is zero.
double recall(const ConfusionCounts& c);
double precision(const ConfusionCounts& c);
/// (TP+TN)/(TP+FN+TN+FP) -- the published "MAP" expression, used as printed.
double map_metric(const ConfusionCounts& c);
double f1(const ConfusionCounts& c);

/// 1000 / mean latency. Throws EmptyInputError on an empty log.
double avg_fps(const std::vector<DetectionRecord>& records);

struct MetricRow {
  std::string dataset;
  std::string metric;            // Recall, Precision, MAP, F1
  std::optional<double> score;   // nullopt: undefined
  double avg_fps = 0.0;
  std::optional<double> accuracy_pct;  // map_metric * 100 for the dataset
};

struct MetricReport {
  std::vector<MetricRow> rows;
  std::map<std::string, ConfusionCounts> counts;  // per dataset id plus "D"
};

struct DatasetLog {
  DatasetDescriptor descriptor;
  std::vector<DetectionRecord> records;
};

inline const std::string kOverallDataset = "D";

/// Per-dataset rows followed by the overall "D" rows on the union of logs.
MetricReport evaluate(const std::vector<DatasetLog>& logs);

// `odmlog v1 <dataset_id>` header, then `frame_id,gt|-,pred|-,latency_ms`.
DatasetLog read_log(std::istream& in);
DatasetLog load_log(const std::string& path);
void write_log(std::ostream& out, const DatasetLog& log);

/// Comma-separated table: dataset,metric,score,avg_fps,accuracy_pct.
void write_report(std::ostream& out, const MetricReport& report);

}  // namespace rescuesim::odm
