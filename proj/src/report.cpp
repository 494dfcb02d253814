#include "pairfreeze/report.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "pairfreeze/alloc_counter.hpp"
#include "pairfreeze/error.hpp"

namespace pairfreeze {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

ordered_json report_to_json(const RunReport& r) {
  ordered_json j;
  j["method"] = r.method;
  j["architecture"] = r.architecture;
  j["dataset"] = r.dataset;
  j["epochs"] = r.epochs;
  j["batch_size"] = r.batch_size;
  j["lr"] = r.lr;
  j["momentum"] = r.momentum;
  j["seed"] = r.seed;
  j["budget"] = r.budget;
  j["total_training_seconds"] = r.total_training_seconds;
  j["peak_memory_bytes"] = r.peak_memory_bytes;
  j["accuracy"] = r.accuracy;
  if (!r.stages.empty()) {
    ordered_json stages = ordered_json::array();
    for (const StageRecord& s : r.stages) {
      ordered_json js;
      js["stage"] = s.stage;
      js["layers"] = s.layers;
      js["epochs"] = s.epochs;
      js["seconds"] = s.seconds;
      js["final_loss"] = s.final_loss;
      stages.push_back(std::move(js));
    }
    j["stages"] = std::move(stages);
  }
  j["epoch_losses"] = r.epoch_losses;
  return j;
}

RunReport report_from_json(const ordered_json& j) {
  RunReport r;
  r.method = j.at("method").get<std::string>();
  r.architecture = j.at("architecture").get<std::string>();
  r.dataset = j.at("dataset").get<std::string>();
  r.epochs = j.at("epochs").get<int>();
  r.batch_size = j.at("batch_size").get<int>();
  r.lr = j.at("lr").get<double>();
  r.momentum = j.at("momentum").get<double>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.budget = j.at("budget").get<std::string>();
  r.total_training_seconds = j.at("total_training_seconds").get<double>();
  r.peak_memory_bytes = j.at("peak_memory_bytes").get<std::uint64_t>();
  r.accuracy = j.at("accuracy").get<double>();
  if (j.contains("stages")) {
    for (const auto& js : j.at("stages")) {
      StageRecord s;
      s.stage = js.at("stage").get<int>();
      s.layers = js.at("layers").get<std::vector<int>>();
      s.epochs = js.at("epochs").get<int>();
      s.seconds = js.at("seconds").get<double>();
      s.final_loss = js.at("final_loss").get<double>();
      r.stages.push_back(std::move(s));
    }
  }
  r.epoch_losses = j.at("epoch_losses").get<std::vector<double>>();
  return r;
}

}  // namespace

bool operator==(const StageRecord& a, const StageRecord& b) {
  return a.stage == b.stage && a.layers == b.layers && a.epochs == b.epochs &&
         a.seconds == b.seconds && a.final_loss == b.final_loss;
}

bool operator==(const RunReport& a, const RunReport& b) {
  return a.method == b.method && a.architecture == b.architecture && a.dataset == b.dataset &&
         a.epochs == b.epochs && a.batch_size == b.batch_size && a.lr == b.lr &&
         a.momentum == b.momentum && a.seed == b.seed && a.budget == b.budget &&
         a.total_training_seconds == b.total_training_seconds &&
         a.peak_memory_bytes == b.peak_memory_bytes && a.accuracy == b.accuracy &&
         a.stages == b.stages && a.epoch_losses == b.epoch_losses;
}

Measurement measure(const std::function<void()>& run) {
  AllocCounter& counter = AllocCounter::instance();
  counter.reset_peak();
  const auto t0 = std::chrono::steady_clock::now();
  run();
  const auto t1 = std::chrono::steady_clock::now();
  Measurement m;
  m.seconds = std::chrono::duration<double>(t1 - t0).count();
  m.peak_bytes = counter.peak_bytes();
  return m;
}

std::string write_report(const std::vector<RunReport>& reports, ReportFormat format) {
  if (format == ReportFormat::json) {
    ordered_json j;
    j["schema"] = "pairfreeze/v1";
    ordered_json arr = ordered_json::array();
    for (const RunReport& r : reports) arr.push_back(report_to_json(r));
    j["reports"] = std::move(arr);
    return j.dump(2) + "\n";
  }
  std::string out = "architecture,method,total_training_seconds,accuracy,peak_memory_bytes\n";
  for (const RunReport& r : reports) {
    out += r.architecture + "," + r.method + "," + fixed6(r.total_training_seconds) + "," +
           fixed6(r.accuracy) + "," + std::to_string(r.peak_memory_bytes) + "\n";
  }
  return out;
}

std::vector<RunReport> read_reports_json(const std::string& text) {
  ordered_json j = ordered_json::parse(text, nullptr, false);
  if (j.is_discarded()) fail(Error::Kind::parse, "report: invalid JSON");
  if (!j.contains("schema") || j.at("schema").get<std::string>() != "pairfreeze/v1")
    fail(Error::Kind::parse, "report: unknown schema");
  std::vector<RunReport> reports;
  for (const auto& rj : j.at("reports")) reports.push_back(report_from_json(rj));
  return reports;
}

std::vector<CsvRow> read_reports_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) ||
      line != "architecture,method,total_training_seconds,accuracy,peak_memory_bytes")
    fail(Error::Kind::parse, "report csv: bad header");
  std::vector<CsvRow> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    CsvRow row;
    std::string field;
    std::getline(ls, row.architecture, ',');
    std::getline(ls, row.method, ',');
    std::getline(ls, field, ',');
    row.total_training_seconds = std::stod(field);
    std::getline(ls, field, ',');
    row.accuracy = std::stod(field);
    std::getline(ls, field, ',');
    row.peak_memory_bytes = std::stoull(field);
    rows.push_back(std::move(row));
  }
  return rows;
}

ComparisonTable compare(const std::vector<RunReport>& reports) {
  ComparisonTable table;
  for (const RunReport& r : reports)
    table.rows.push_back(
        {r.architecture, r.method, r.total_training_seconds, r.accuracy, r.peak_memory_bytes});

  // group by architecture, preserving first-seen order
  std::vector<std::string> order;
  std::map<std::string, std::vector<const RunReport*>> groups;
  for (const RunReport& r : reports) {
    if (groups.find(r.architecture) == groups.end()) order.push_back(r.architecture);
    groups[r.architecture].push_back(&r);
  }

  for (const std::string& arch : order) {
    const RunReport* std_run = nullptr;
    const RunReport* l2l_run = nullptr;
    for (const RunReport* r : groups[arch]) {
      if (r->method == "standard" && !std_run) std_run = r;
      if (r->method == "l2l" && !l2l_run) l2l_run = r;
    }
    if (!std_run || !l2l_run) continue;
    if (std_run->dataset != l2l_run->dataset)
      fail(Error::Kind::state, "compare: architecture ", arch, " mixes datasets '",
           std_run->dataset, "' and '", l2l_run->dataset, "'");
    ComparisonRatios ratios;
    ratios.architecture = arch;
    ratios.time_ratio = l2l_run->total_training_seconds / std_run->total_training_seconds;
    ratios.memory_ratio = static_cast<double>(l2l_run->peak_memory_bytes) /
                          static_cast<double>(std_run->peak_memory_bytes);
    ratios.accuracy_delta = l2l_run->accuracy - std_run->accuracy;
    ratios.l2l_accuracy_below_standard = l2l_run->accuracy < std_run->accuracy;
    table.ratios.push_back(std::move(ratios));
  }
  return table;
}

std::string comparison_csv(const ComparisonTable& table) {
  std::string out = "architecture,method,total_training_seconds,accuracy,peak_memory_bytes\n";
  for (const ComparisonRow& r : table.rows) {
    out += r.architecture + "," + r.method + "," + fixed6(r.total_training_seconds) + "," +
           fixed6(r.accuracy) + "," + std::to_string(r.peak_memory_bytes) + "\n";
  }
  for (const ComparisonRatios& r : table.ratios) {
    out += "# " + r.architecture + " l2l/standard: time_ratio=" + fixed6(r.time_ratio) +
           " memory_ratio=" + fixed6(r.memory_ratio) +
           " accuracy_delta=" + fixed6(r.accuracy_delta);
    if (r.l2l_accuracy_below_standard) out += " (l2l below standard)";
    out += "\n";
  }
  return out;
}

std::string comparison_json(const std::vector<RunReport>& reports,
                            const ComparisonTable& table) {
  ordered_json j;
  j["schema"] = "pairfreeze/v1";
  ordered_json arr = ordered_json::array();
  for (const RunReport& r : reports) arr.push_back(report_to_json(r));
  j["reports"] = std::move(arr);
  ordered_json jt;
  ordered_json rows = ordered_json::array();
  for (const ComparisonRow& r : table.rows) {
    ordered_json jr;
    jr["architecture"] = r.architecture;
    jr["method"] = r.method;
    jr["total_training_seconds"] = r.total_training_seconds;
    jr["accuracy"] = r.accuracy;
    jr["peak_memory_bytes"] = r.peak_memory_bytes;
    rows.push_back(std::move(jr));
  }
  jt["rows"] = std::move(rows);
  ordered_json ratios = ordered_json::array();
  for (const ComparisonRatios& r : table.ratios) {
    ordered_json jr;
    jr["architecture"] = r.architecture;
    jr["time_ratio"] = r.time_ratio;
    jr["memory_ratio"] = r.memory_ratio;
    jr["accuracy_delta"] = r.accuracy_delta;
    jr["l2l_accuracy_below_standard"] = r.l2l_accuracy_below_standard;
    ratios.push_back(std::move(jr));
  }
  jt["ratios"] = std::move(ratios);
  j["comparison"] = std::move(jt);
  return j.dump(2) + "\n";
}

void write_file_atomic(const std::string& path, const std::string& contents) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(Error::Kind::io, "cannot write ", tmp);
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) fail(Error::Kind::io, "short write to ", tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) fail(Error::Kind::io, "cannot rename ", tmp, " to ", path, ": ", ec.message());
}

}  // namespace pairfreeze
