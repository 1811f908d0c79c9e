#include "scpolab/checkpoint.hpp"

#include <fstream>
#include <stdexcept>
#include <vector>

#include <json.hpp>

namespace scpolab {

namespace {

using nlohmann::json;

void write_file(const std::string& path, const json& header, const Eigen::VectorXd& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot write '" + path + "'");
  out << header.dump() << '\n';
  out.write(reinterpret_cast<const char*>(params.data()),
            static_cast<std::streamsize>(params.size() * sizeof(double)));
  if (!out) throw std::runtime_error("checkpoint: short write to '" + path + "'");
}

json read_header(std::ifstream& in, const std::string& path) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("checkpoint: missing header in '" + path + "'");
  return json::parse(line);
}

Eigen::VectorXd read_params(std::ifstream& in, const std::string& path, Eigen::Index count) {
  Eigen::VectorXd params(count);
  in.read(reinterpret_cast<char*>(params.data()),
          static_cast<std::streamsize>(count * sizeof(double)));
  if (!in) throw std::runtime_error("checkpoint: truncated payload in '" + path + "'");
  return params;
}

}  // namespace

void save_policy_checkpoint(const GaussianPolicy& policy, const std::string& path) {
  json header;
  header["kind"] = "gaussian_policy";
  header["layer_sizes"] = policy.mean_net.layer_sizes();
  header["log_std"] = std::vector<double>(policy.log_std.data(),
                                          policy.log_std.data() + policy.log_std.size());
  header["param_count"] = policy.mean_net.param_count();
  write_file(path, header, policy.mean_net.flat());
}

GaussianPolicy load_policy_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot read '" + path + "'");
  const json header = read_header(in, path);
  if (header.at("kind") != "gaussian_policy") {
    throw std::runtime_error("checkpoint: '" + path + "' is not a policy snapshot");
  }
  GaussianPolicy policy;
  policy.mean_net = Mlp(header.at("layer_sizes").get<std::vector<int>>());
  const std::vector<double> log_std = header.at("log_std").get<std::vector<double>>();
  policy.log_std = Eigen::Map<const Eigen::VectorXd>(log_std.data(), log_std.size());
  const auto count = header.at("param_count").get<Eigen::Index>();
  if (count != policy.mean_net.param_count()) {
    throw std::runtime_error("checkpoint: parameter count mismatch in '" + path + "'");
  }
  policy.mean_net.set_flat(read_params(in, path, count));
  return policy;
}

void save_value_checkpoint(const ValueFunction& value, const std::string& path) {
  json header;
  header["kind"] = "value";
  header["layer_sizes"] = value.net.layer_sizes();
  header["param_count"] = value.net.param_count();
  write_file(path, header, value.net.flat());
}

ValueFunction load_value_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot read '" + path + "'");
  const json header = read_header(in, path);
  if (header.at("kind") != "value") {
    throw std::runtime_error("checkpoint: '" + path + "' is not a value snapshot");
  }
  ValueFunction value;
  value.net = Mlp(header.at("layer_sizes").get<std::vector<int>>());
  const auto count = header.at("param_count").get<Eigen::Index>();
  if (count != value.net.param_count()) {
    throw std::runtime_error("checkpoint: parameter count mismatch in '" + path + "'");
  }
  value.net.set_flat(read_params(in, path, count));
  return value;
}

}  // namespace scpolab
