#pragma once

#include <cstdint>
#include <string>

#include "dgm/field.hpp"

namespace dgm {

// Binary multi-channel grid container (".dgmf"): 16-byte header
//   magic "DGMF" | version u8 = 1 | dtype u8 | channels u16 | height u32 | width u32
// followed by the payload, channel-major row-major, all integers and payload
// scalars little-endian. f64 round-trips bit-exactly.
enum class FieldDtype : uint8_t { F32 = 1, F64 = 2, U16 = 3 };

void write_field(const std::string& path, const FeatureMap& f,
                 FieldDtype dtype = FieldDtype::F64);
FeatureMap read_field(const std::string& path);
FieldDtype peek_field_dtype(const std::string& path);

// Label masks stored as single-channel U16 fields; labels must fit [0, 65535].
void write_mask(const std::string& path, const LabelMask& mask);
LabelMask read_mask(const std::string& path);

// Binary PGM (P5). Values up to 65535; two-byte samples are big-endian per
// the format. Comment lines (#) allowed in the header.
LabelMask read_pgm(const std::string& path);
void write_pgm(const std::string& path, const LabelMask& mask, int maxval = 255);

}  // namespace dgm
