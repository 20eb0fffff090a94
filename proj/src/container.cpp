#include "resdmd/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "resdmd/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "container payloads are little-endian; big-endian hosts are unsupported");

namespace resdmd {

RawContainer read_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    fail(ErrorKind::IoError, "cannot open " + path.string());
  }
  std::string header_line;
  if (!std::getline(in, header_line)) {
    fail(ErrorKind::MalformedHeader, path.string() + ": missing header line");
  }
  RawContainer c;
  c.header = nlohmann::ordered_json::parse(header_line, nullptr, false);
  if (c.header.is_discarded() || !c.header.is_object()) {
    fail(ErrorKind::MalformedHeader, path.string() + ": header is not a JSON object");
  }
  if (require_int(c.header, "format_version") != kFormatVersion) {
    fail(ErrorKind::MalformedHeader, path.string() + ": unsupported format_version");
  }
  c.payload.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  return c;
}

void write_container(const std::filesystem::path& path,
                     const nlohmann::ordered_json& header,
                     const void* payload, std::size_t payload_bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    fail(ErrorKind::IoError, "cannot write " + path.string());
  }
  const std::string head = header.dump();
  out.write(head.data(), static_cast<std::streamsize>(head.size()));
  out.put('\n');
  if (payload_bytes > 0) {
    out.write(static_cast<const char*>(payload), static_cast<std::streamsize>(payload_bytes));
  }
  out.flush();
  if (!out) {
    fail(ErrorKind::IoError, "short write to " + path.string());
  }
}

std::vector<std::uint8_t> encode_f32(const std::vector<double>& values) {
  std::vector<std::uint8_t> bytes(values.size() * sizeof(float));
  for (std::size_t i = 0; i < values.size(); ++i) {
    const float f = static_cast<float>(values[i]);
    std::memcpy(bytes.data() + i * sizeof(float), &f, sizeof(float));
  }
  return bytes;
}

std::vector<double> decode_f32(const std::uint8_t* bytes, std::size_t n_values) {
  std::vector<double> values(n_values);
  for (std::size_t i = 0; i < n_values; ++i) {
    float f;
    std::memcpy(&f, bytes + i * sizeof(float), sizeof(float));
    values[i] = static_cast<double>(f);
  }
  return values;
}

void append_f64(std::vector<std::uint8_t>& out, const double* values, std::size_t n) {
  const std::size_t offset = out.size();
  out.resize(offset + n * sizeof(double));
  std::memcpy(out.data() + offset, values, n * sizeof(double));
}

std::vector<double> decode_f64(const std::uint8_t* bytes, std::size_t n_values) {
  std::vector<double> values(n_values);
  std::memcpy(values.data(), bytes, n_values * sizeof(double));
  return values;
}

nlohmann::ordered_json require_field(const nlohmann::ordered_json& header,
                                     const std::string& key) {
  auto it = header.find(key);
  if (it == header.end()) {
    fail(ErrorKind::MalformedHeader, "header missing field \"" + key + "\"");
  }
  return *it;
}

std::int64_t require_int(const nlohmann::ordered_json& header, const std::string& key) {
  auto field = require_field(header, key);
  if (!field.is_number_integer()) {
    fail(ErrorKind::MalformedHeader, "header field \"" + key + "\" is not an integer");
  }
  return field.get<std::int64_t>();
}

std::string require_string(const nlohmann::ordered_json& header, const std::string& key) {
  auto field = require_field(header, key);
  if (!field.is_string()) {
    fail(ErrorKind::MalformedHeader, "header field \"" + key + "\" is not a string");
  }
  return field.get<std::string>();
}

}  // namespace resdmd
