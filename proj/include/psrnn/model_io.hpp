#pragma once

#include <string>

#include "psrnn/model.hpp"

namespace psrnn {

// Binary model container, version 1.  Layout (all integers little-endian):
//   magic "PSRN" | u32 version
//   repeated named arrays:
//     u16 name_len | name | u8 rank | rank x u64 dims | f64 payload (row-major)
//   u16 0 sentinel
//   u64 meta_len | canonical JSON metadata
// Serialization is canonical: save(load(f)) reproduces f byte for byte.
std::string serialize_model(const PsrnnModel& m);
PsrnnModel deserialize_model(const std::string& bytes);

void save_model(const PsrnnModel& m, const std::string& path);
PsrnnModel load_model(const std::string& path);

}  // namespace psrnn
