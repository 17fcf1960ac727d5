#pragma once

#include <string>
#include <vector>

#include "gpssm/data/dataset.hpp"
#include "gpssm/ssm/model.hpp"

namespace gpssm::eval {

/// A trained model with what is needed to predict on raw data.
struct SavedModel {
  ssm::SSMModel model;
  data::NormalizationStats stats;
  std::vector<std::string> u_columns;
  std::vector<std::string> y_columns;
  std::string algorithm;
  std::string dataset;
};

/// JSON with every parameter in shortest round-trip form, so a reload is
/// exact.
std::string model_to_json(const SavedModel& saved);
SavedModel model_from_json(const std::string& text);

void save_model(const std::string& path, const SavedModel& saved);
/// Throws DataError when the file is unreadable or inconsistent.
SavedModel load_model(const std::string& path);

}  // namespace gpssm::eval
