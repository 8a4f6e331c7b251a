#pragma once

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <vector>

#include <nlohmann/json.hpp>

#include "flags/aggregation.hpp"
#include "flags/topology.hpp"

namespace flags {

struct AccuracyRow {
  int round = 0;
  NodeId node = 0;
  double accuracy = 0.0;
  double loss = 0.0;

  friend bool operator==(const AccuracyRow&, const AccuracyRow&) = default;
};

struct CommCounts {
  std::uint64_t d2d = 0;
  std::uint64_t d2e = 0;
  std::uint64_t e2c = 0;

  std::uint64_t total() const noexcept { return d2d + d2e + e2c; }
  friend bool operator==(const CommCounts&, const CommCounts&) = default;
};

// Per-round accuracy rows and per-round, per-link message counters. Appends
// are serialised so phases may record from worker threads.
class MetricsLog : public MessageSink {
 public:
  MetricsLog() = default;
  MetricsLog(const MetricsLog& other);
  MetricsLog& operator=(const MetricsLog& other);

  void record_message(Link link, int round) override;
  void add_row(const AccuracyRow& row);
  // Makes sure a comm entry exists for every round up to `round`.
  void touch_round(int round);
  void set_round_comm(int round, const CommCounts& counts);

  const std::vector<AccuracyRow>& rows() const noexcept { return rows_; }
  // comm()[r - 1] holds the counters of round r.
  const std::vector<CommCounts>& comm() const noexcept { return comm_; }
  CommCounts comm_for_round(int round) const;

  nlohmann::json& run_meta() noexcept { return meta_; }
  const nlohmann::json& run_meta() const noexcept { return meta_; }

 private:
  mutable std::mutex mu_;
  std::vector<AccuracyRow> rows_;
  std::vector<CommCounts> comm_;
  nlohmann::json meta_ = nlohmann::json::object();
};

struct SummaryRow {
  int round = 0;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;  // population standard deviation over nodes
  double mean_loss = 0.0;
  CommCounts cumulative;
};

// One row per round that has accuracy rows, in round order. Throws
// InvalidArgument on an empty log.
std::vector<SummaryRow> summarize(const MetricsLog& log);

// Writes metrics.csv, comm.csv and run.json into dir (created if missing).
void export_metrics(const MetricsLog& log, const std::filesystem::path& dir);

// Reads back a directory written by export_metrics.
MetricsLog import_metrics(const std::filesystem::path& dir);

// Shortest decimal text that parses back to exactly v.
std::string format_double(double v);
double parse_double(std::string_view text);

}  // namespace flags
