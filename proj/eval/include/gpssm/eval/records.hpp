#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace gpssm::eval {

/// One trained and evaluated (config, seed). Wall-clock time is kept out of
/// the record so that reruns compare bit-identical; see TimingRecord.
struct ResultRecord {
  std::string experiment;
  std::string algorithm;
  std::string dataset;
  std::uint64_t seed = 0;
  int seqlen = 0;
  double k = 0.0;
  double beta = 0.0;
  int iterations = 0;
  double rmse = 0.0;      // normalized outputs
  double rmse_raw = 0.0;  // original units
  /// Per-step predictive log-likelihood, normalized and original units.
  double log_likelihood = 0.0;
  double log_likelihood_raw = 0.0;
  double final_elbo = 0.0;
  int skipped_steps = 0;
  /// File names relative to the run directory.
  std::string elbo_trace;
  std::string model_file;
};

struct TimingRecord {
  std::string algorithm;
  std::uint64_t seed = 0;
  int seqlen = 0;
  double train_seconds = 0.0;
};

std::string to_json_line(const ResultRecord& r);
ResultRecord record_from_json_line(const std::string& line);
std::string to_json_line(const TimingRecord& t);

/// Appends one line per record, creating the file when needed.
void append_jsonl(const std::string& path, const std::vector<ResultRecord>& records);
void append_jsonl(const std::string& path, const std::vector<TimingRecord>& timings);
/// Reads every record of a JSONL file; blank lines are skipped. Throws
/// DataError naming the line of the first malformed record.
std::vector<ResultRecord> read_jsonl(const std::string& path);
/// CSV export with a header row.
void write_records_csv(const std::string& path, const std::vector<ResultRecord>& records);

/// Sample statistics of one table cell (n - 1 denominator; 0 when n = 1).
struct CellStats {
  int n = 0;
  double mean = 0.0;
  double std = 0.0;
};

CellStats cell_stats(const std::vector<double>& values);
/// "0.446 (0.017)".
std::string format_cell(const CellStats& c, int decimals = 3);

/// Rows are datasets, columns algorithms, cells RMSE over seeds.
struct BenchmarkTable {
  std::vector<std::string> datasets;
  std::vector<std::string> algorithms;
  std::map<std::pair<std::string, std::string>, CellStats> cells;
  /// (dataset, algorithm) pairs with no record.
  std::vector<std::pair<std::string, std::string>> missing;

  /// Algorithm with the lowest mean in a row; empty when the row has no cells.
  [[nodiscard]] std::string best(const std::string& dataset) const;
};

/// `use_raw` selects rmse_raw instead of the normalized rmse.
BenchmarkTable aggregate(const std::vector<ResultRecord>& records, bool use_raw = false);
std::string render_text(const BenchmarkTable& table);
std::string render_csv(const BenchmarkTable& table);

/// Per (algorithm, seqlen) RMSE statistics, sorted by algorithm then length.
struct SweepRow {
  std::string algorithm;
  int seqlen = 0;
  CellStats rmse;
};

std::vector<SweepRow> sweep_rows(const std::vector<ResultRecord>& records);
std::string render_sweep_csv(const std::vector<SweepRow>& rows);

}  // namespace gpssm::eval
