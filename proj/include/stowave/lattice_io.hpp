#ifndef STOWAVE_LATTICE_IO_HPP
#define STOWAVE_LATTICE_IO_HPP

// Field snapshot formats.
//
// Binary layout (all integers and floats little-endian):
//   bytes  0..7   magic "STWFLD01"
//   bytes  8..11  uint32 dim
//   bytes 12..15  uint32 n
//   bytes 16..23  uint64 frame index
//   bytes 24..31  reserved, zero
//   then n^dim float64 values in row-major order (last axis fastest).
//
// CSV: header "i,x,value" (dim 1) or "i,j,k,x,y,z,value" (dim 3), one row per
// lattice point, values printed with 17 significant digits.

#include <array>
#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "lattice.hpp"

namespace stowave {

inline constexpr std::array<char, 8> field_magic{'S', 'T', 'W', 'F', 'L', 'D', '0', '1'};
inline constexpr std::size_t field_header_bytes = 32;
inline constexpr std::size_t csv_max_points = 65536;

namespace detail {

template <class T>
void put_le(std::ostream& os, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    std::array<unsigned char, sizeof(T)> bytes{};
    std::memcpy(bytes.data(), &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    os.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <class T>
T get_le(std::istream& is) {
    std::array<unsigned char, sizeof(T)> bytes{};
    if (!is.read(reinterpret_cast<char*>(bytes.data()), sizeof(T)))
        throw std::runtime_error("field binary: truncated input");
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    T value;
    std::memcpy(&value, bytes.data(), sizeof(T));
    return value;
}

} // namespace detail

inline void write_field_binary(std::ostream& os, const Field& field, std::uint64_t frame_index) {
    os.write(field_magic.data(), field_magic.size());
    detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(field.grid().dim()));
    detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(field.grid().n()));
    detail::put_le<std::uint64_t>(os, frame_index);
    detail::put_le<std::uint64_t>(os, 0);
    for (double v : field.values()) detail::put_le<double>(os, v);
}

struct FieldRecord {
    std::uint32_t dim = 0;
    std::uint32_t n = 0;
    std::uint64_t frame_index = 0;
    std::vector<double> values;
};

inline FieldRecord read_field_binary(std::istream& is) {
    std::array<char, 8> magic{};
    if (!is.read(magic.data(), magic.size()) || magic != field_magic)
        throw std::runtime_error("field binary: bad magic");
    FieldRecord rec;
    rec.dim = detail::get_le<std::uint32_t>(is);
    rec.n = detail::get_le<std::uint32_t>(is);
    rec.frame_index = detail::get_le<std::uint64_t>(is);
    (void)detail::get_le<std::uint64_t>(is);
    if (rec.dim != 1 && rec.dim != 3) throw std::runtime_error("field binary: bad dimension");
    std::size_t total = 1;
    for (std::uint32_t a = 0; a < rec.dim; ++a) total *= rec.n;
    rec.values.resize(total);
    for (auto& v : rec.values) v = detail::get_le<double>(is);
    return rec;
}

/// Rebuilds a Field from a record; the grid must match the stored shape.
inline Field to_field(const Grid& grid, FieldRecord rec) {
    if (rec.dim != static_cast<std::uint32_t>(grid.dim()) || rec.n != static_cast<std::uint32_t>(grid.n()))
        throw std::invalid_argument("field binary: record does not match grid");
    return Field(grid, std::move(rec.values));
}

inline void write_field_csv(std::ostream& os, const Field& field) {
    const Grid& g = field.grid();
    if (g.size() > csv_max_points) throw std::invalid_argument("field csv: grid too large for CSV output");
    os << (g.dim() == 1 ? "i,x,value\n" : "i,j,k,x,y,z,value\n");
    std::ostringstream line;
    line.precision(17);
    for (std::size_t p = 0; p < g.size(); ++p) {
        line.str("");
        const auto x = g.coordinate(p);
        for (int a = 0; a < g.dim(); ++a) line << g.axis_index(p, a) << ',';
        for (int a = 0; a < g.dim(); ++a) line << x[a] << ',';
        line << field[p] << '\n';
        os << line.str();
    }
}

} // namespace stowave

#endif
