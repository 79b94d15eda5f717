// JSON model format.
#pragma once

#include <stdexcept>
#include <string>

#include <json.hpp>

#include "posdelay/model.hpp"

namespace posdelay {

/// Schema violation; path() is a JSON pointer to the offending value.
class SchemaError : public std::invalid_argument {
 public:
  SchemaError(std::string path, const std::string& message);
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j, const std::string& path);
nlohmann::json vector_to_json(const Vector& v);
Vector vector_from_json(const nlohmann::json& j, const std::string& path);

nlohmann::json delay_to_json(const DelaySpec& d);
DelaySpec delay_from_json(const nlohmann::json& j, const std::string& path);

nlohmann::json kernel_to_json(const DelayKernel& k);
DelayKernel kernel_from_json(const nlohmann::json& j, const std::string& path);

/// Parses, fills absent channels with zeros and checks dimensions.
SystemModel model_from_json(const nlohmann::json& j);
nlohmann::json model_to_json(const SystemModel& m);

SystemModel load_model(const std::string& text);
std::string save_model(const SystemModel& m);
SystemModel load_model_file(const std::string& path);

}  // namespace posdelay
