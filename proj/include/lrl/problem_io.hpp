#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "json.hpp"
#include "lrl/sensing.hpp"

namespace lrl {

inline constexpr int kProblemFileVersion = 1;

/// Problem file layout (JSON):
///
///   { "version": 1, "d1": .., "d2": .., "n": .., "lambda": ..,
///     "operator": { "kind": "gaussian" | "identity" | "explicit",
///                   "seed": <uint64, gaussian only>,
///                   "matrices": [[row-major A_1], ...] (explicit only) },
///     "y": [..],
///     "ground_truth": { "m_star": [row-major], "xi": [..], "r_star": .. } }
///
/// Gaussian operators are stored by seed and regenerated on load.
nlohmann::json instance_to_json(const ProblemInstance& inst);

/// Throws FormatError for structural problems (missing keys, wrong types,
/// unsupported version) and ValidationError for inconsistent sizes.
ProblemInstance instance_from_json(const nlohmann::json& doc);

ProblemInstance parse_instance(std::string_view text);
void save_instance(const std::filesystem::path& path, const ProblemInstance& inst);
ProblemInstance load_instance(const std::filesystem::path& path);

/// Row-major flat array of a matrix.
nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j, Index rows, Index cols, std::string_view where);
nlohmann::json vector_to_json(const Vector& v);
Vector vector_from_json(const nlohmann::json& j, std::string_view where);

/// Parse a whole file as JSON; parse errors become FormatError naming the
/// file and the line/column.
nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc);

/// Shortest round-trip decimal form of a double.
std::string format_double(double x);

}  // namespace lrl
