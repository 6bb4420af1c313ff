#include "mevt/weights.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <vector>

namespace mevt {

namespace {

static_assert(std::endian::native == std::endian::little, "weights I/O assumes a little-endian host");

void write_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }

bool read_exact(std::istream& in, void* dst, std::size_t n) {
  in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
  return static_cast<std::size_t>(in.gcount()) == n;
}

std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  if (!read_exact(in, &v, 4)) throw Error(ErrorCode::unexpected_eof, "unexpected end of file");
  return v;
}

std::string shape_string(const std::vector<std::uint32_t>& s) {
  std::string r = "[";
  for (std::size_t i = 0; i < s.size(); ++i) r += (i ? "," : "") + std::to_string(s[i]);
  return r + "]";
}

}  // namespace

void save_weights(const Model& model, std::ostream& out) {
  out.write(kWeightsMagic.data(), static_cast<std::streamsize>(kWeightsMagic.size()));
  visit_params(model, [&out](const ParamView& v) {
    write_u32(out, static_cast<std::uint32_t>(v.name.size()));
    out.write(v.name.data(), static_cast<std::streamsize>(v.name.size()));
    write_u32(out, static_cast<std::uint32_t>(v.shape.size()));
    for (auto d : v.shape) write_u32(out, d);
    out.write(reinterpret_cast<const char*>(v.data.data()),
              static_cast<std::streamsize>(v.data.size_bytes()));
  });
  if (!out) throw Error(ErrorCode::io_error, "failed writing weights");
}

void save_weights(const Model& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io_error, "cannot open " + path.string());
  save_weights(model, out);
}

void load_weights(Model& model, std::istream& in) {
  std::map<std::string, ParamView> slots;
  visit_params(model, [&slots](ParamView& v) { slots.emplace(v.name, v); });

  char magic[8];
  if (!read_exact(in, magic, sizeof magic) || std::memcmp(magic, kWeightsMagic.data(), 8) != 0) {
    throw Error(ErrorCode::bad_magic, "bad magic: not a weights file");
  }

  std::set<std::string> seen;
  while (in.peek() != std::char_traits<char>::eof()) {
    const std::uint32_t len = read_u32(in);
    if (len > 4096) throw Error(ErrorCode::parse_error, "parameter name too long");
    std::string name(len, '\0');
    if (!read_exact(in, name.data(), len)) throw Error(ErrorCode::unexpected_eof, "unexpected end of file");
    const std::uint32_t rank = read_u32(in);
    if (rank > 8) throw Error(ErrorCode::parse_error, "parameter rank too large: " + name);
    std::vector<std::uint32_t> shape(rank);
    for (auto& d : shape) d = read_u32(in);

    const auto it = slots.find(name);
    if (it == slots.end() || !seen.insert(name).second) {
      throw Error(ErrorCode::unexpected_parameter, "unexpected parameter " + name);
    }
    if (shape != it->second.shape) {
      throw Error(ErrorCode::shape_mismatch, "shape mismatch for " + name + ": file " + shape_string(shape) +
                                                 ", model " + shape_string(it->second.shape));
    }
    if (!read_exact(in, it->second.data.data(), it->second.data.size_bytes())) {
      throw Error(ErrorCode::unexpected_eof, "unexpected end of file");
    }
  }
  for (const auto& [name, view] : slots) {
    if (!seen.count(name)) throw Error(ErrorCode::missing_parameter, "missing parameter " + name);
  }
}

void load_weights(Model& model, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_error, "cannot open " + path.string());
  load_weights(model, in);
}

}  // namespace mevt
