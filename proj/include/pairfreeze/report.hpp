#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace pairfreeze {

struct StageRecord {
  int stage = 0;
  std::vector<int> layers;  // model layer indices trained in this stage
  int epochs = 0;
  double seconds = 0.0;
  double final_loss = 0.0;
};

// The three paper metrics plus enough configuration echo to reproduce a run.
struct RunReport {
  std::string method;  // "standard" | "l2l"
  std::string architecture;
  std::string dataset;
  int epochs = 0;
  int batch_size = 0;
  double lr = 0.0;
  double momentum = 0.0;
  std::uint64_t seed = 0;
  std::string budget;  // "per-stage" | "split" (empty for standard)
  double total_training_seconds = 0.0;
  std::uint64_t peak_memory_bytes = 0;
  double accuracy = 0.0;
  std::vector<StageRecord> stages;      // l2l only
  std::vector<double> epoch_losses;
};

bool operator==(const StageRecord& a, const StageRecord& b);
bool operator==(const RunReport& a, const RunReport& b);

// Wall time (monotonic clock) and allocation high-water mark around a
// computation. Resets the peak at entry; not reentrant.
struct Measurement {
  double seconds = 0.0;
  std::uint64_t peak_bytes = 0;
};
Measurement measure(const std::function<void()>& run);

enum class ReportFormat { json, csv };

// JSON: versioned schema, stable key order. CSV: fixed header
// architecture,method,total_training_seconds,accuracy,peak_memory_bytes
// with 6-decimal reals, rows in input order. Both byte-deterministic.
std::string write_report(const std::vector<RunReport>& reports, ReportFormat format);
std::vector<RunReport> read_reports_json(const std::string& text);

struct CsvRow {
  std::string architecture;
  std::string method;
  double total_training_seconds = 0.0;
  double accuracy = 0.0;
  std::uint64_t peak_memory_bytes = 0;
};
std::vector<CsvRow> read_reports_csv(const std::string& text);

struct ComparisonRow {
  std::string architecture;
  std::string method;
  double total_training_seconds = 0.0;
  double accuracy = 0.0;
  std::uint64_t peak_memory_bytes = 0;
};

// Ratios are present only when both methods exist for an architecture.
struct ComparisonRatios {
  std::string architecture;
  double time_ratio = 0.0;    // l2l / standard
  double memory_ratio = 0.0;  // l2l / standard
  double accuracy_delta = 0.0;  // l2l - standard
  bool l2l_accuracy_below_standard = false;  // flagged, never fatal
};

struct ComparisonTable {
  std::vector<ComparisonRow> rows;
  std::vector<ComparisonRatios> ratios;
};

ComparisonTable compare(const std::vector<RunReport>& reports);
std::string comparison_csv(const ComparisonTable& table);
std::string comparison_json(const std::vector<RunReport>& reports, const ComparisonTable& table);

// temp-file + rename so readers never observe partial output
void write_file_atomic(const std::string& path, const std::string& contents);

}  // namespace pairfreeze
