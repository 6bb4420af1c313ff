#pragma once

#include "mevt/model.hpp"

#include <filesystem>
#include <iosfwd>
#include <string_view>

namespace mevt {

// Binary layout: 8-byte magic, then records until end of file:
//   u32 name_len, name bytes, u32 rank, rank x u32 dims, float32 data
// All integers and floats little-endian.
inline constexpr std::string_view kWeightsMagic = "MEVTW001";

void save_weights(const Model& model, std::ostream& out);
void save_weights(const Model& model, const std::filesystem::path& path);

// Fills every parameter of `model` (already shaped for the configuration).
// Unknown or duplicated names, shape mismatches, truncation and missing
// parameters all throw.
void load_weights(Model& model, std::istream& in);
void load_weights(Model& model, const std::filesystem::path& path);

}  // namespace mevt
