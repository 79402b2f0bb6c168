#include "tss/ad/checkpoint.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cstdint>
#include <fstream>
#include <iterator>

#include "tss/errors.hpp"

namespace tss::ad {

namespace {

constexpr const char* kMagic = "TSSCKPT/1";

template <class U>
void put_le(std::string& out, U bits) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

template <class U>
U get_le(const unsigned char* p) {
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) bits |= static_cast<U>(p[i]) << (8 * i);
  return bits;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedArray>& arrays, DType dtype) {
  const std::size_t width = dtype == DType::kFloat64 ? 8 : 4;
  nlohmann::json header;
  header["tensors"] = nlohmann::json::array();
  std::string data;
  for (const auto& a : arrays) {
    if (numel(a.shape) != a.values.size())
      throw DomainError("save_checkpoint: shape/value mismatch for " + a.name);
    header["tensors"].push_back({{"name", a.name},
                                 {"shape", a.shape},
                                 {"dtype", dtype == DType::kFloat64 ? "float64" : "float32"},
                                 {"offset", data.size()},
                                 {"bytes", a.values.size() * width}});
    for (double v : a.values) {
      if (dtype == DType::kFloat64) {
        put_le(data, std::bit_cast<std::uint64_t>(v));
      } else {
        put_le(data, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
      }
    }
  }
  header["data_bytes"] = data.size();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("save_checkpoint: cannot open " + path.string());
  out << kMagic << '\n' << header.dump() << '\n';
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError("save_checkpoint: write failed for " + path.string());
}

std::vector<NamedArray> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("load_checkpoint: cannot open " + path.string());
  std::string magic, header_line;
  if (!std::getline(in, magic) || magic != kMagic) throw FormatError("load_checkpoint: bad magic in " + path.string());
  if (!std::getline(in, header_line)) throw FormatError("load_checkpoint: missing header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_line);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("load_checkpoint: malformed header: ") + e.what());
  }
  const std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (data.size() != header.value("data_bytes", std::size_t{0}))
    throw FormatError("load_checkpoint: data section size mismatch in " + path.string());
  const auto* bytes = reinterpret_cast<const unsigned char*>(data.data());

  std::vector<NamedArray> out;
  try {
    for (const auto& t : header.at("tensors")) {
      NamedArray a;
      a.name = t.at("name").get<std::string>();
      a.shape = t.at("shape").get<Shape>();
      const auto dtype = t.at("dtype").get<std::string>();
      const auto offset = t.at("offset").get<std::size_t>();
      const std::size_t n = numel(a.shape);
      const std::size_t width = dtype == "float64" ? 8 : dtype == "float32" ? 4 : 0;
      if (width == 0) throw FormatError("load_checkpoint: unknown dtype " + dtype);
      if (offset + n * width > data.size()) throw FormatError("load_checkpoint: tensor " + a.name + " out of bounds");
      a.values.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        const unsigned char* p = bytes + offset + i * width;
        a.values[i] = width == 8 ? std::bit_cast<double>(get_le<std::uint64_t>(p))
                                 : static_cast<double>(std::bit_cast<float>(get_le<std::uint32_t>(p)));
      }
      out.push_back(std::move(a));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("load_checkpoint: malformed header: ") + e.what());
  }
  return out;
}

}  // namespace tss::ad
