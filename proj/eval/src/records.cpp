#include "gpssm/eval/records.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "gpssm/error.hpp"
#include "json_util.hpp"

namespace gpssm::eval {

namespace {

using detail::json;

std::string shortest(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

template <typename T>
void append_lines(const std::string& path, const std::vector<T>& items) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw DataError(path + ": cannot open for appending");
  for (const T& item : items) out << to_json_line(item) << '\n';
  if (!out) throw DataError(path + ": write failed");
}

}  // namespace

std::string to_json_line(const ResultRecord& r) {
  const json j{{"experiment", r.experiment},
               {"algorithm", r.algorithm},
               {"dataset", r.dataset},
               {"seed", r.seed},
               {"seqlen", r.seqlen},
               {"k", r.k},
               {"beta", r.beta},
               {"iterations", r.iterations},
               {"rmse", r.rmse},
               {"rmse_raw", r.rmse_raw},
               {"log_likelihood", r.log_likelihood},
               {"log_likelihood_raw", r.log_likelihood_raw},
               {"final_elbo", r.final_elbo},
               {"skipped_steps", r.skipped_steps},
               {"elbo_trace", r.elbo_trace},
               {"model_file", r.model_file}};
  return j.dump();
}

ResultRecord record_from_json_line(const std::string& line) {
  const json j = json::parse(line);
  ResultRecord r;
  r.experiment = j.value("experiment", std::string());
  r.algorithm = j.at("algorithm").get<std::string>();
  r.dataset = j.at("dataset").get<std::string>();
  r.seed = j.value("seed", std::uint64_t{0});
  r.seqlen = j.value("seqlen", 0);
  r.k = j.value("k", 0.0);
  r.beta = j.value("beta", 0.0);
  r.iterations = j.value("iterations", 0);
  r.rmse = j.at("rmse").get<double>();
  r.rmse_raw = j.value("rmse_raw", r.rmse);
  r.log_likelihood = j.value("log_likelihood", 0.0);
  r.log_likelihood_raw = j.value("log_likelihood_raw", 0.0);
  r.final_elbo = j.value("final_elbo", 0.0);
  r.skipped_steps = j.value("skipped_steps", 0);
  r.elbo_trace = j.value("elbo_trace", std::string());
  r.model_file = j.value("model_file", std::string());
  return r;
}

std::string to_json_line(const TimingRecord& t) {
  return json{{"algorithm", t.algorithm},
              {"seed", t.seed},
              {"seqlen", t.seqlen},
              {"train_seconds", t.train_seconds}}
      .dump();
}

void append_jsonl(const std::string& path, const std::vector<ResultRecord>& records) {
  append_lines(path, records);
}

void append_jsonl(const std::string& path, const std::vector<TimingRecord>& timings) {
  append_lines(path, timings);
}

std::vector<ResultRecord> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path + ": cannot open results file");
  std::vector<ResultRecord> out;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(record_from_json_line(line));
    } catch (const json::exception& e) {
      throw DataError(path + ":" + std::to_string(number) + ": malformed record: " + e.what());
    }
  }
  return out;
}

void write_records_csv(const std::string& path, const std::vector<ResultRecord>& records) {
  std::ofstream out(path);
  if (!out) throw DataError(path + ": cannot open for writing");
  out << "experiment,algorithm,dataset,seed,seqlen,k,beta,iterations,rmse,rmse_raw,"
         "log_likelihood,log_likelihood_raw,final_elbo,skipped_steps,elbo_trace,model_file\n";
  for (const ResultRecord& r : records) {
    out << csv_escape(r.experiment) << ',' << csv_escape(r.algorithm) << ','
        << csv_escape(r.dataset) << ',' << r.seed << ',' << r.seqlen << ',' << shortest(r.k) << ','
        << shortest(r.beta) << ',' << r.iterations << ',' << shortest(r.rmse) << ','
        << shortest(r.rmse_raw) << ',' << shortest(r.log_likelihood) << ','
        << shortest(r.log_likelihood_raw) << ',' << shortest(r.final_elbo) << ','
        << r.skipped_steps << ',' << csv_escape(r.elbo_trace) << ','
        << csv_escape(r.model_file) << '\n';
  }
  if (!out) throw DataError(path + ": write failed");
}

CellStats cell_stats(const std::vector<double>& values) {
  CellStats c;
  c.n = static_cast<int>(values.size());
  if (c.n == 0) return c;
  double sum = 0.0;
  for (double v : values) sum += v;
  c.mean = sum / c.n;
  if (c.n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - c.mean) * (v - c.mean);
    c.std = std::sqrt(ss / (c.n - 1));
  }
  return c;
}

std::string format_cell(const CellStats& c, int decimals) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(decimals) << c.mean << " (" << c.std << ")";
  return os.str();
}

std::string BenchmarkTable::best(const std::string& dataset) const {
  std::string winner;
  double lowest = 0.0;
  for (const std::string& a : algorithms) {
    const auto it = cells.find({dataset, a});
    if (it == cells.end()) continue;
    if (winner.empty() || it->second.mean < lowest) {
      winner = a;
      lowest = it->second.mean;
    }
  }
  return winner;
}

BenchmarkTable aggregate(const std::vector<ResultRecord>& records, bool use_raw) {
  BenchmarkTable t;
  std::map<std::pair<std::string, std::string>, std::vector<double>> values;
  for (const ResultRecord& r : records) {
    if (std::find(t.datasets.begin(), t.datasets.end(), r.dataset) == t.datasets.end()) {
      t.datasets.push_back(r.dataset);
    }
    if (std::find(t.algorithms.begin(), t.algorithms.end(), r.algorithm) == t.algorithms.end()) {
      t.algorithms.push_back(r.algorithm);
    }
    values[{r.dataset, r.algorithm}].push_back(use_raw ? r.rmse_raw : r.rmse);
  }
  for (const auto& [key, v] : values) t.cells[key] = cell_stats(v);
  for (const std::string& d : t.datasets) {
    for (const std::string& a : t.algorithms) {
      if (!t.cells.count({d, a})) t.missing.emplace_back(d, a);
    }
  }
  return t;
}

std::string render_text(const BenchmarkTable& table) {
  std::vector<std::string> header{"dataset"};
  header.insert(header.end(), table.algorithms.begin(), table.algorithms.end());
  header.push_back("best");
  std::vector<std::vector<std::string>> rows{header};
  for (const std::string& d : table.datasets) {
    std::vector<std::string> row{d};
    for (const std::string& a : table.algorithms) {
      const auto it = table.cells.find({d, a});
      row.push_back(it == table.cells.end() ? "-" : format_cell(it->second));
    }
    row.push_back(table.best(d));
    rows.push_back(std::move(row));
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream os;
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c > 0) os << "  ";
      os << std::left << std::setw(static_cast<int>(width[c])) << row[c];
    }
    os << '\n';
  }
  return os.str();
}

std::string render_csv(const BenchmarkTable& table) {
  std::ostringstream os;
  os << "dataset";
  for (const std::string& a : table.algorithms) os << ',' << csv_escape(a);
  os << ",best\n";
  for (const std::string& d : table.datasets) {
    os << csv_escape(d);
    for (const std::string& a : table.algorithms) {
      const auto it = table.cells.find({d, a});
      os << ',' << (it == table.cells.end() ? "" : format_cell(it->second));
    }
    os << ',' << table.best(d) << '\n';
  }
  return os.str();
}

std::vector<SweepRow> sweep_rows(const std::vector<ResultRecord>& records) {
  std::map<std::pair<std::string, int>, std::vector<double>> values;
  for (const ResultRecord& r : records) values[{r.algorithm, r.seqlen}].push_back(r.rmse);
  std::vector<SweepRow> rows;
  for (const auto& [key, v] : values) rows.push_back({key.first, key.second, cell_stats(v)});
  return rows;
}

std::string render_sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os << "algorithm,seqlen,rmse_mean,rmse_std,n\n";
  for (const SweepRow& r : rows) {
    os << r.algorithm << ',' << r.seqlen << ',' << shortest(r.rmse.mean) << ','
       << shortest(r.rmse.std) << ',' << r.rmse.n << '\n';
  }
  return os.str();
}

}  // namespace gpssm::eval
