#include "gpssm/data/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <json.hpp>
#include <set>
#include <sstream>

#include "gpssm/error.hpp"

namespace gpssm::data {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(
        start, comma == std::string::npos ? std::string::npos : comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

double parse_cell(const std::string& cell, const std::string& path, long row,
                  const std::string& column) {
  double value = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (!cell.empty() && *first == '+') ++first;
  const auto res = std::from_chars(first, last, value);
  if (cell.empty() || res.ec != std::errc() || res.ptr != last || !std::isfinite(value)) {
    throw DataError(path + ": row " + std::to_string(row) + ", column '" + column +
                    "': not a finite number: '" + cell + "'");
  }
  return value;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

Eigen::MatrixXd rows_to_matrix(const std::vector<std::vector<double>>& rows, std::size_t offset,
                               std::size_t cols) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][offset + c];
    }
  }
  return m;
}

std::string resolve(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return p;
  const std::filesystem::path path(p);
  return path.is_absolute() ? p : (base / path).string();
}

}  // namespace

std::vector<Trajectory> read_trajectories(const std::string& path, const CsvSpec& spec) {
  std::ifstream in(path);
  if (!in) throw DataError(path + ": cannot open file");
  if (spec.y_columns.empty()) throw ConfigError(path + ": no output columns declared");
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": empty file (no header row)");
  const std::vector<std::string> header = split_line(line);
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < header.size(); ++i) index.emplace(header[i], i);

  auto column = [&](const std::string& name) {
    const auto it = index.find(name);
    if (it == index.end()) throw DataError(path + ": missing column '" + name + "'");
    return it->second;
  };
  std::vector<std::size_t> wanted;
  for (const auto& c : spec.u_columns) wanted.push_back(column(c));
  for (const auto& c : spec.y_columns) wanted.push_back(column(c));
  const bool has_seq = !spec.seq_column.empty() && index.count(spec.seq_column) > 0;
  const std::size_t seq_idx = has_seq ? index.at(spec.seq_column) : 0;

  std::vector<Trajectory> out;
  std::vector<std::vector<double>> rows;
  std::string current_seq;
  auto flush = [&]() {
    if (rows.empty()) return;
    Trajectory t;
    t.u = rows_to_matrix(rows, 0, spec.u_columns.size());
    t.y = rows_to_matrix(rows, spec.u_columns.size(), spec.y_columns.size());
    t.source = path + (has_seq ? "#seq=" + current_seq : "");
    if (t.length() < 2) {
      throw DataError(path + ": sequence '" + current_seq + "' has fewer than 2 rows");
    }
    out.push_back(std::move(t));
    rows.clear();
  };

  long row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const std::vector<std::string> cells = split_line(line);
    if (cells.size() != header.size()) {
      throw DataError(path + ": row " + std::to_string(row) + " has " +
                      std::to_string(cells.size()) + " cells, header has " +
                      std::to_string(header.size()));
    }
    if (has_seq && cells[seq_idx] != current_seq) {
      flush();
      current_seq = cells[seq_idx];
    }
    std::vector<double> values;
    values.reserve(wanted.size());
    for (std::size_t c : wanted) values.push_back(parse_cell(cells[c], path, row, header[c]));
    rows.push_back(std::move(values));
  }
  flush();
  if (out.empty()) throw DataError(path + ": no data rows (empty sequence)");
  return out;
}

Dataset split_dataset(std::vector<Trajectory> all, const CsvSpec& spec) {
  if (!(spec.train_fraction > 0.0 && spec.train_fraction <= 1.0)) {
    throw ConfigError("train_fraction must be in (0, 1]");
  }
  std::vector<Trajectory> train;
  std::vector<Trajectory> test;
  if (all.size() == 1) {
    Trajectory& t = all.front();
    const int n_train = spec.train_fraction >= 1.0
                            ? t.length()
                            : static_cast<int>(std::floor(spec.train_fraction * t.length()));
    if (n_train < 2 || (n_train < t.length() && t.length() - n_train < 2)) {
      throw DataError(spec.name + ": trajectory too short for the requested split");
    }
    Trajectory head{t.u.topRows(n_train), t.y.topRows(n_train),
                    t.x.size() ? Eigen::MatrixXd(t.x.topRows(n_train)) : Eigen::MatrixXd(),
                    t.source + "#train"};
    train.push_back(std::move(head));
    if (n_train < t.length()) {
      const int rest = t.length() - n_train;
      Trajectory tail{t.u.bottomRows(rest), t.y.bottomRows(rest),
                      t.x.size() ? Eigen::MatrixXd(t.x.bottomRows(rest)) : Eigen::MatrixXd(),
                      t.source + "#test"};
      test.push_back(std::move(tail));
    }
  } else {
    const auto n = all.size();
    auto n_train = static_cast<std::size_t>(std::llround(spec.train_fraction * n));
    n_train = std::clamp<std::size_t>(n_train, 1, n);
    for (std::size_t i = 0; i < n; ++i) (i < n_train ? train : test).push_back(std::move(all[i]));
  }
  DatasetMeta meta{spec.name, static_cast<int>(spec.u_columns.size()),
                   static_cast<int>(spec.y_columns.size()), spec.lag};
  return make_dataset(std::move(train), std::move(test), std::move(meta));
}

Dataset load_csv(const std::string& path, const CsvSpec& spec) {
  return split_dataset(read_trajectories(path, spec), spec);
}

void save_csv(const std::string& path, const std::vector<Trajectory>& trajectories,
              const CsvSpec& spec) {
  std::ofstream out(path);
  if (!out) throw DataError(path + ": cannot open for writing");
  const std::string seq = spec.seq_column.empty() ? "seq" : spec.seq_column;
  out << seq;
  for (const auto& c : spec.u_columns) out << ',' << c;
  for (const auto& c : spec.y_columns) out << ',' << c;
  out << '\n';
  for (std::size_t k = 0; k < trajectories.size(); ++k) {
    const Trajectory& t = trajectories[k];
    if (t.d_u() != static_cast<int>(spec.u_columns.size()) ||
        t.d_y() != static_cast<int>(spec.y_columns.size())) {
      throw ShapeError(path + ": trajectory width does not match the column spec");
    }
    for (int r = 0; r < t.length(); ++r) {
      out << (k + 1);
      for (int c = 0; c < t.d_u(); ++c) out << ',' << format_double(t.u(r, c));
      for (int c = 0; c < t.d_y(); ++c) out << ',' << format_double(t.y(r, c));
      out << '\n';
    }
  }
  if (!out) throw DataError(path + ": write failed");
}

Manifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path + ": cannot open manifest");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": invalid JSON: " + e.what());
  }
  if (!j.is_object()) throw ConfigError(path + ": manifest must be a JSON object");
  static const std::set<std::string> known{"name",      "csv",        "train_csv", "test_csv",
                                           "u_columns", "y_columns",  "seq_column",
                                           "lag",       "train_fraction", "source", "notes"};
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw ConfigError(path + ": unknown manifest key '" + key + "'");
  }
  const std::filesystem::path base = std::filesystem::path(path).parent_path();
  Manifest m;
  try {
    m.spec.name = j.value("name", std::filesystem::path(path).stem().string());
    m.spec.u_columns = j.value("u_columns", std::vector<std::string>{});
    m.spec.y_columns = j.at("y_columns").get<std::vector<std::string>>();
    m.spec.seq_column = j.value("seq_column", std::string("seq"));
    m.spec.lag = j.value("lag", 5);
    m.spec.train_fraction = j.value("train_fraction", 0.5);
    m.csv = resolve(base, j.value("csv", std::string()));
    m.train_csv = resolve(base, j.value("train_csv", std::string()));
    m.test_csv = resolve(base, j.value("test_csv", std::string()));
    m.source = j.value("source", std::string());
    m.notes = j.value("notes", std::string());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  if (m.csv.empty() == m.train_csv.empty()) {
    throw ConfigError(path + ": give either 'csv' or 'train_csv' (+ optional 'test_csv')");
  }
  return m;
}

Dataset load_manifest(const std::string& path) {
  const Manifest m = read_manifest(path);
  if (!m.csv.empty()) return load_csv(m.csv, m.spec);
  std::vector<Trajectory> train = read_trajectories(m.train_csv, m.spec);
  std::vector<Trajectory> test;
  if (!m.test_csv.empty()) test = read_trajectories(m.test_csv, m.spec);
  DatasetMeta meta{m.spec.name, static_cast<int>(m.spec.u_columns.size()),
                   static_cast<int>(m.spec.y_columns.size()), m.spec.lag};
  return make_dataset(std::move(train), std::move(test), std::move(meta));
}

}  // namespace gpssm::data
