// SPDX-License-Identifier: Apache-2.0
#include "centerscan/container.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>
#include <stdexcept>

namespace centerscan {

static_assert(std::endian::native == std::endian::little, "container I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'C', 'S', 'C', 'K', 'P', 'T', '0', '1'};

}  // namespace

void write_container(const std::filesystem::path& path, const std::vector<NamedArray>& arrays,
                     const std::string& meta_json) {
  nlohmann::ordered_json header;
  header["arrays"] = nlohmann::ordered_json::array();
  std::uint64_t offset = 0;
  for (const auto& a : arrays) {
    if (shape_numel(a.shape) != a.data.size()) {
      throw ShapeError("write_container: '" + a.name + "' shape " + shape_str(a.shape) + " holds " +
                       std::to_string(a.data.size()) + " values");
    }
    header["arrays"].push_back({{"name", a.name}, {"offset", offset}, {"shape", a.shape}, {"frozen", a.frozen}});
    offset += a.data.size() * sizeof(double);
  }
  header["meta"] = nlohmann::ordered_json::parse(meta_json);
  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("write_container: cannot open " + path.string());
  out.write(kMagic, sizeof kMagic);
  const std::uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& a : arrays) {
    out.write(reinterpret_cast<const char*>(a.data.data()), static_cast<std::streamsize>(a.data.size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("write_container: write failed for " + path.string());
}

std::vector<NamedArray> read_container(const std::filesystem::path& path, std::string* meta_json) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_container: cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw std::runtime_error("read_container: bad magic in " + path.string());
  }
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw std::runtime_error("read_container: truncated header in " + path.string());
  auto header = nlohmann::json::parse(text);
  const auto payload_start = in.tellg();
  std::vector<NamedArray> out;
  for (const auto& e : header.at("arrays")) {
    NamedArray a;
    a.name = e.at("name").get<std::string>();
    a.shape = e.at("shape").get<Shape>();
    a.frozen = e.at("frozen").get<bool>();
    a.data.resize(shape_numel(a.shape));
    in.seekg(payload_start + static_cast<std::streamoff>(e.at("offset").get<std::uint64_t>()));
    in.read(reinterpret_cast<char*>(a.data.data()), static_cast<std::streamsize>(a.data.size() * sizeof(double)));
    if (!in) throw std::runtime_error("read_container: truncated payload for '" + a.name + "'");
    out.push_back(std::move(a));
  }
  if (meta_json) *meta_json = header.contains("meta") ? header["meta"].dump() : "{}";
  return out;
}

std::vector<NamedArray> to_arrays(const ParameterSet& params, const std::string& prefix) {
  std::vector<NamedArray> out;
  for (const auto& e : params.entries()) {
    out.push_back({prefix + e.name, e.value.shape(), {e.value.data().begin(), e.value.data().end()}, e.frozen});
  }
  return out;
}

void load_arrays(ParameterSet& params, const std::vector<NamedArray>& arrays, const std::string& prefix) {
  ParameterSet staged;
  for (const auto& a : arrays) {
    if (a.name.rfind(prefix, 0) != 0) continue;
    staged.add(a.name.substr(prefix.size()), Tensor::from(a.shape, a.data), a.frozen);
  }
  params.load_values(staged);
}

}  // namespace centerscan
