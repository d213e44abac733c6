#pragma once

// Versioned JSON model files. Every number is stored at full precision, so
// save -> load reproduces parameters bit for bit.

#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "pfmix/model.hpp"

namespace pfmix {

inline constexpr int kModelFormatVersion = 1;

nlohmann::json to_json(const Model& model);
/// Throws DataError when the document is not a valid model file.
Model model_from_json(const nlohmann::json& doc);

void save_model(const std::filesystem::path& path, const Model& model);
Model load_model(const std::filesystem::path& path);

nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);
nlohmann::json vector_to_json(const Vector& v);
Vector vector_from_json(const nlohmann::json& j);

/// 64-bit FNV-1a, used for content digests in run reports.
std::uint64_t fnv1a64(std::string_view bytes);
std::string hex_digest(std::string_view bytes);

}  // namespace pfmix
