#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace resdmd {

// On-disk container: one UTF-8 JSON header line, a '\n', then a raw
// little-endian binary payload. Every artifact the toolkit writes (grid
// series, climatologies, skill maps, models, checkpoints) uses this layout;
// the header's "kind" and "dtype" fields say what the payload holds.
inline constexpr int kFormatVersion = 1;

struct RawContainer {
  nlohmann::ordered_json header;
  std::vector<std::uint8_t> payload;
};

RawContainer read_container(const std::filesystem::path& path);

// Writes header + '\n' + payload. The header is serialized compactly with
// keys in insertion order, so identical inputs give identical bytes.
void write_container(const std::filesystem::path& path,
                     const nlohmann::ordered_json& header,
                     const void* payload, std::size_t payload_bytes);

// Payload codecs. float32 is the storage precision for gridded data;
// float64 is used for fitted-model parameters.
std::vector<std::uint8_t> encode_f32(const std::vector<double>& values);
std::vector<double> decode_f32(const std::uint8_t* bytes, std::size_t n_values);
void append_f64(std::vector<std::uint8_t>& out, const double* values, std::size_t n);
std::vector<double> decode_f64(const std::uint8_t* bytes, std::size_t n_values);

// Header field access that reports malformed/missing fields as format errors
// instead of nlohmann exceptions.
nlohmann::ordered_json require_field(const nlohmann::ordered_json& header,
                                     const std::string& key);
std::int64_t require_int(const nlohmann::ordered_json& header, const std::string& key);
std::string require_string(const nlohmann::ordered_json& header, const std::string& key);

}  // namespace resdmd
