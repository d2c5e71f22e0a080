#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "corrpair/model.hpp"

namespace corrpair {

using Json = nlohmann::json;

// Model document; see README for the schema. `n` overrides or supplies the
// dimension for size-independent documents.
PairModelSpec spec_from_json(const Json& doc, std::optional<int> n = std::nullopt);
Json spec_to_json(const PairModelSpec& spec);

FilterSpec filter_from_json(const Json& doc, int n);
Json filter_to_json(const FilterSpec& f);

// 8-byte little-endian N, then N*N float64 row-major real parts and, for the
// complex class, N*N imaginary parts.
void write_matrix_binary(const std::string& path, const Matrix& m, SymmetryClass s);
Matrix read_matrix_binary(const std::string& path);

std::string canonical_dump(const Json& doc);
std::uint64_t json_hash(const Json& doc);
std::string hex64(std::uint64_t v);

Json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace corrpair
