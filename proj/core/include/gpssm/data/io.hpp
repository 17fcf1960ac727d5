#pragma once

#include <string>
#include <vector>

#include "gpssm/data/dataset.hpp"

namespace gpssm::data {

/// Column layout of a CSV file: comma separated, header row, '.' decimal.
/// When the header contains `seq_column`, a change in its value starts a new
/// trajectory.
struct CsvSpec {
  std::vector<std::string> u_columns;
  std::vector<std::string> y_columns;
  std::string seq_column = "seq";
  /// Fraction of trajectories (or of time steps, for a single trajectory)
  /// used for training.
  double train_fraction = 0.5;
  std::string name;
  int lag = 5;
};

/// Parses every trajectory in `path`. Throws DataError naming the row and
/// column of the first bad cell, a missing column, or an empty file.
std::vector<Trajectory> read_trajectories(const std::string& path, const CsvSpec& spec);

/// Reads `path` and splits it into train/test per `spec.train_fraction`.
Dataset load_csv(const std::string& path, const CsvSpec& spec);

/// Writes trajectories with a `seq` column (1-based) followed by the u and y
/// columns named in `spec`. Values are written in shortest round-trip form.
void save_csv(const std::string& path, const std::vector<Trajectory>& trajectories,
              const CsvSpec& spec);

/// Dataset manifest (JSON):
///   name, u_columns, y_columns, lag, and either `csv` + `train_fraction`
///   or `train_csv` + `test_csv`; optional `seq_column`, `source`, `notes`.
/// Relative paths resolve against the manifest's directory.
struct Manifest {
  CsvSpec spec;
  std::string csv;
  std::string train_csv;
  std::string test_csv;
  std::string source;
  std::string notes;
};

Manifest read_manifest(const std::string& path);
Dataset load_manifest(const std::string& path);

/// Splits a whole-file trajectory list the way `load_csv` does.
Dataset split_dataset(std::vector<Trajectory> all, const CsvSpec& spec);

}  // namespace gpssm::data
