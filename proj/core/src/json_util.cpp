#include "json_util.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "realism/error.hpp"

namespace realism::detail {

json matrix_to_json(const Matrix& m) {
  json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  j["data"] = vector_to_json(m.values());
  return j;
}

Matrix matrix_from_json(const json& j, const std::string& where) {
  if (!j.is_object() || !j.contains("rows") || !j.contains("cols") || !j.contains("data")) {
    throw ValidationError(where + ": matrix needs rows, cols and data");
  }
  const auto rows = j["rows"].get<std::size_t>();
  const auto cols = j["cols"].get<std::size_t>();
  Vector data = vector_from_json(j["data"], where);
  if (data.size() != rows * cols) {
    throw ShapeError(where + ": matrix data has " + std::to_string(data.size()) + " values, expected " +
                     std::to_string(rows * cols));
  }
  return Matrix(rows, cols, std::move(data));
}

json vector_to_json(std::span<const double> v) {
  json arr = json::array();
  for (double x : v) arr.push_back(x);
  return arr;
}

Vector vector_from_json(const json& j, const std::string& where) {
  if (!j.is_array()) throw ValidationError(where + ": expected an array of numbers");
  Vector v;
  v.reserve(j.size());
  for (const auto& x : j) {
    if (!x.is_number()) throw ValidationError(where + ": expected an array of numbers");
    const double d = x.get<double>();
    if (!std::isfinite(d)) throw NumericError(where + ": non-finite value");
    v.push_back(d);
  }
  return v;
}

json mlp_to_json(const MlpParams& p) {
  json j;
  j["activations"] = json::array();
  for (auto a : p.activations) j["activations"].push_back(to_string(a));
  j["layers"] = json::array();
  for (const auto& l : p.layers) {
    json lj;
    lj["weight"] = matrix_to_json(l.weight);
    lj["bias"] = vector_to_json(l.bias);
    j["layers"].push_back(std::move(lj));
  }
  return j;
}

MlpParams mlp_from_json(const json& j, const std::string& where) {
  if (!j.is_object() || !j.contains("layers") || !j.contains("activations")) {
    throw ValidationError(where + ": mlp needs layers and activations");
  }
  MlpParams p;
  for (const auto& a : j["activations"]) p.activations.push_back(activation_from_string(a.get<std::string>()));
  for (std::size_t i = 0; i < j["layers"].size(); ++i) {
    const auto& lj = j["layers"][i];
    const std::string lw = where + ".layers[" + std::to_string(i) + "]";
    if (!lj.contains("weight") || !lj.contains("bias")) throw ValidationError(lw + ": needs weight and bias");
    p.layers.push_back({matrix_from_json(lj["weight"], lw), vector_from_json(lj["bias"], lw)});
  }
  p.validate();
  return p;
}

json parse_json(const std::string& text, const std::string& where) {
  try {
    return json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(where + ": " + e.what());
  }
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace realism::detail
