#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "layercard/linalg.hpp"

namespace layercard {

using Json = nlohmann::json;

// Canonical serialization: object keys sorted (nlohmann's default ordering),
// floating-point numbers printed with 17 significant digits so values
// round-trip exactly and hashes are language-independent. indent < 0 emits
// the compact form used for hashing.
std::string canonical_dump(const Json& j, int indent = -1);

// Hex FNV-1a fingerprint of the compact canonical serialization.
std::string canonical_id(const Json& j);

// %.17g rendering shared by JSON and CSV emitters.
std::string format_double(double v);

std::string base64_encode(const std::uint8_t* data, std::size_t len);
std::string base64_encode(const std::vector<std::uint8_t>& data);
std::vector<std::uint8_t> base64_decode(std::string_view text);

// Little-endian 64-bit float packing for weight blobs.
std::string encode_doubles(const double* data, std::size_t count);
std::string encode_doubles(const std::vector<double>& data);
std::vector<double> decode_doubles(std::string_view base64_text);

// Matrix/vector interchange schema: {"dim": n, "data": [row-major]} and
// {"vec": [...]}.
Json matrix_to_json(const SymMatrix& m);
SymMatrix matrix_from_json(const Json& j);
Json dense_to_json(const Matrix& m);  // {"rows","cols","data"} general blocks
Matrix dense_from_json(const Json& j);
Json vector_to_json(const Vector& v);
Vector vector_from_json(const Json& j);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);
Json read_json(const std::string& path);

// Minimal CSV layer: numeric cells rendered via format_double, header-checked
// reads. Cells must not contain commas or newlines.
struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

std::string csv_dump(const Csv& csv);
Csv csv_parse(std::string_view text);
double csv_cell_double(const Csv& csv, std::size_t row, std::string_view column);

}  // namespace layercard
