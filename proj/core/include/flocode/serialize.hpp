#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "flocode/tensor.hpp"

namespace flocode::io {

// Little-endian binary primitives for checkpoint files. Doubles are stored
// as raw IEEE-754 bits so values round-trip exactly.
void write_u32(std::ostream& os, uint32_t v);
void write_i64(std::ostream& os, int64_t v);
void write_f64(std::ostream& os, double v);
void write_string(std::ostream& os, const std::string& s);
void write_tensor(std::ostream& os, const Tensor& t);

uint32_t read_u32(std::istream& is);
int64_t read_i64(std::istream& is);
double read_f64(std::istream& is);
std::string read_string(std::istream& is);
Tensor read_tensor(std::istream& is);

}  // namespace flocode::io
