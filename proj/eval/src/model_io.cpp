#include "gpssm/eval/model_io.hpp"

#include <fstream>
#include <sstream>

#include "gpssm/error.hpp"
#include "json_util.hpp"

namespace gpssm::eval {

namespace {

using detail::json;

constexpr int kFormatVersion = 1;

json pack(const Eigen::MatrixXd& m) {
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) values.push_back(m(r, c));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", values}};
}

Eigen::MatrixXd unpack(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto values = j.at("data").get<std::vector<double>>();
  if (rows < 0 || cols < 0 || static_cast<Eigen::Index>(values.size()) != rows * cols) {
    throw DataError("model file: matrix size does not match its data");
  }
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = values[static_cast<std::size_t>(r * cols + c)];
  }
  return m;
}

Eigen::RowVectorXd unpack_row(const json& j) {
  const Eigen::MatrixXd m = unpack(j);
  if (m.rows() > 1) throw DataError("model file: expected a row vector");
  return m.rows() == 0 ? Eigen::RowVectorXd() : Eigen::RowVectorXd(m.row(0));
}

json pack_gp(const gp::SparseGP& g) {
  json kernels = json::array();
  for (const gp::Kernel& k : g.kernels) {
    kernels.push_back({{"log_variance", k.log_variance}, {"log_lengthscales", pack(k.log_lengthscales)}});
  }
  json chol = json::array();
  for (const Eigen::MatrixXd& c : g.q_chol_raw) chol.push_back(pack(c));
  return {{"kernels", kernels},
          {"mean_kind", detail::to_string(g.mean_kind)},
          {"mean_constant", g.mean_constant},
          {"identity_offset", g.identity_offset},
          {"mean_weights", pack(g.mean_weights)},
          {"inducing_inputs", pack(g.inducing_inputs)},
          {"q_mean_residual", pack(g.q_mean)},
          {"q_chol_raw", chol},
          {"jitter", g.jitter}};
}

gp::SparseGP unpack_gp(const json& j) {
  gp::SparseGP g;
  for (const json& k : j.at("kernels")) {
    gp::Kernel kernel;
    kernel.log_variance = k.at("log_variance").get<double>();
    kernel.log_lengthscales = unpack_row(k.at("log_lengthscales"));
    g.kernels.push_back(std::move(kernel));
  }
  g.mean_kind = detail::mean_kind_from_string(j.at("mean_kind").get<std::string>());
  g.mean_constant = j.at("mean_constant").get<double>();
  g.identity_offset = j.at("identity_offset").get<int>();
  g.mean_weights = unpack(j.at("mean_weights"));
  g.inducing_inputs = unpack(j.at("inducing_inputs"));
  g.q_mean = unpack(j.at("q_mean_residual"));
  for (const json& c : j.at("q_chol_raw")) g.q_chol_raw.push_back(unpack(c));
  g.jitter = j.at("jitter").get<double>();
  return g;
}

json pack_recognition(const ssm::RecognitionModule& r) {
  return {{"lag", r.lag}, {"weight", pack(r.weight)}, {"bias", pack(r.bias)}};
}

ssm::RecognitionModule unpack_recognition(const json& j) {
  ssm::RecognitionModule r;
  r.lag = j.at("lag").get<int>();
  r.weight = unpack(j.at("weight"));
  r.bias = unpack_row(j.at("bias"));
  return r;
}

}  // namespace

std::string model_to_json(const SavedModel& s) {
  const ssm::SSMModel& m = s.model;
  json j;
  j["format_version"] = kFormatVersion;
  j["algorithm"] = s.algorithm;
  j["dataset"] = s.dataset;
  j["u_columns"] = s.u_columns;
  j["y_columns"] = s.y_columns;
  j["stats"] = {{"u_mean", pack(s.stats.u_mean)},
                {"u_std", pack(s.stats.u_std)},
                {"y_mean", pack(s.stats.y_mean)},
                {"y_std", pack(s.stats.y_std)}};
  j["d_x"] = m.d_x;
  j["d_y"] = m.d_y;
  j["d_u"] = m.d_u;
  j["forward"] = pack_gp(m.forward);
  j["backward"] = pack_gp(m.backward);
  j["log_process_noise"] = pack(m.log_process_noise);
  j["log_obs_noise"] = pack(m.log_obs_noise);
  j["log_pseudo_noise"] = pack(m.log_pseudo_noise);
  j["prior_x1_mean"] = pack(m.prior_x1_mean);
  j["prior_x1_var"] = pack(m.prior_x1_var);
  j["recognition"] = pack_recognition(m.recognition);
  j["backward_recognition"] = pack_recognition(m.backward_recognition);
  j["k_soft"] = m.k_soft;
  j["beta"] = m.beta;
  return j.dump(1);
}

SavedModel model_from_json(const std::string& text) {
  SavedModel s;
  try {
    const json j = json::parse(text);
    if (j.at("format_version").get<int>() != kFormatVersion) {
      throw DataError("model file: unsupported format_version");
    }
    s.algorithm = j.at("algorithm").get<std::string>();
    s.dataset = j.at("dataset").get<std::string>();
    s.u_columns = j.at("u_columns").get<std::vector<std::string>>();
    s.y_columns = j.at("y_columns").get<std::vector<std::string>>();
    const json& st = j.at("stats");
    s.stats.u_mean = unpack_row(st.at("u_mean"));
    s.stats.u_std = unpack_row(st.at("u_std"));
    s.stats.y_mean = unpack_row(st.at("y_mean"));
    s.stats.y_std = unpack_row(st.at("y_std"));
    ssm::SSMModel& m = s.model;
    m.d_x = j.at("d_x").get<int>();
    m.d_y = j.at("d_y").get<int>();
    m.d_u = j.at("d_u").get<int>();
    m.forward = unpack_gp(j.at("forward"));
    m.backward = unpack_gp(j.at("backward"));
    m.log_process_noise = unpack_row(j.at("log_process_noise"));
    m.log_obs_noise = unpack_row(j.at("log_obs_noise"));
    m.log_pseudo_noise = unpack_row(j.at("log_pseudo_noise"));
    m.prior_x1_mean = unpack_row(j.at("prior_x1_mean"));
    m.prior_x1_var = unpack_row(j.at("prior_x1_var"));
    m.recognition = unpack_recognition(j.at("recognition"));
    m.backward_recognition = unpack_recognition(j.at("backward_recognition"));
    m.k_soft = j.at("k_soft").get<double>();
    m.beta = j.at("beta").get<double>();
  } catch (const json::exception& e) {
    throw DataError(std::string("model file: ") + e.what());
  }
  try {
    s.model.validate();
  } catch (const Error& e) {
    throw DataError(std::string("model file: ") + e.what());
  }
  if (static_cast<int>(s.y_columns.size()) != s.model.d_y ||
      static_cast<int>(s.u_columns.size()) != s.model.d_u || s.stats.y_std.size() != s.model.d_y ||
      s.stats.u_std.size() != s.model.d_u) {
    throw DataError("model file: column names or statistics do not match the model dimensions");
  }
  return s;
}

void save_model(const std::string& path, const SavedModel& saved) {
  std::ofstream out(path);
  if (!out) throw DataError(path + ": cannot open for writing");
  out << model_to_json(saved) << '\n';
  if (!out) throw DataError(path + ": write failed");
}

SavedModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path + ": cannot open model file");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return model_from_json(ss.str());
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

}  // namespace gpssm::eval
