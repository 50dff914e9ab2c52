#include "flocode/serialize.hpp"

#include <bit>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <vector>

namespace flocode::io {

namespace {

void put_bytes(std::ostream& os, const void* p, size_t n) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    if (!os) throw std::runtime_error("binary write failed");
}

void get_bytes(std::istream& is, void* p, size_t n) {
    is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (is.gcount() != static_cast<std::streamsize>(n))
        throw std::runtime_error("binary read failed: truncated stream");
}

}  // namespace

void write_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xffu);
    put_bytes(os, b, 4);
}

void write_i64(std::ostream& os, int64_t v) {
    uint64_t u = static_cast<uint64_t>(v);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((u >> (8 * i)) & 0xffu);
    put_bytes(os, b, 8);
}

void write_f64(std::ostream& os, double v) {
    static_assert(sizeof(double) == sizeof(uint64_t));
    uint64_t u;
    std::memcpy(&u, &v, sizeof(u));
    write_i64(os, static_cast<int64_t>(u));
}

void write_string(std::ostream& os, const std::string& s) {
    if (s.size() > std::numeric_limits<uint32_t>::max())
        throw std::runtime_error("string too long to serialize");
    write_u32(os, static_cast<uint32_t>(s.size()));
    if (!s.empty()) put_bytes(os, s.data(), s.size());
}

void write_tensor(std::ostream& os, const Tensor& t) {
    write_u32(os, static_cast<uint32_t>(t.ndim()));
    for (int d = 0; d < t.ndim(); ++d) write_u32(os, static_cast<uint32_t>(t.shape()[static_cast<size_t>(d)]));
    for (int i = 0; i < t.numel(); ++i) write_f64(os, t.data()[i]);
}

uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    get_bytes(is, b, 4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
    return v;
}

int64_t read_i64(std::istream& is) {
    unsigned char b[8];
    get_bytes(is, b, 8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
    return static_cast<int64_t>(v);
}

double read_f64(std::istream& is) {
    uint64_t u = static_cast<uint64_t>(read_i64(is));
    double v;
    std::memcpy(&v, &u, sizeof(v));
    return v;
}

std::string read_string(std::istream& is) {
    uint32_t n = read_u32(is);
    std::string s(n, '\0');
    if (n > 0) get_bytes(is, s.data(), n);
    return s;
}

Tensor read_tensor(std::istream& is) {
    uint32_t nd = read_u32(is);
    if (nd > 8) throw std::runtime_error("tensor rank in stream is implausibly large");
    std::vector<int> shape;
    long numel = 1;
    for (uint32_t d = 0; d < nd; ++d) {
        uint32_t s = read_u32(is);
        if (s == 0 || s > (1u << 28)) throw std::runtime_error("tensor dimension in stream out of range");
        shape.push_back(static_cast<int>(s));
        numel *= s;
    }
    std::vector<double> data(static_cast<size_t>(numel));
    for (long i = 0; i < numel; ++i) data[static_cast<size_t>(i)] = read_f64(is);
    return Tensor::from_data(shape, std::move(data));
}

}  // namespace flocode::io
