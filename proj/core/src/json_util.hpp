#pragma once

// Private JSON helpers shared by the serializers. Not installed.

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "realism/numerics.hpp"

namespace realism::detail {

using json = nlohmann::ordered_json;

json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const json& j, const std::string& where);

json vector_to_json(std::span<const double> v);
Vector vector_from_json(const json& j, const std::string& where);

json mlp_to_json(const MlpParams& p);
MlpParams mlp_from_json(const json& j, const std::string& where);

json parse_json(const std::string& text, const std::string& where);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace realism::detail
