#include "coupledfuse/io.hpp"

#include <bit>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace cfuse {

namespace {

constexpr std::uint8_t kMagic[4] = {0x54, 0x4E, 0x53, 0x52};  // "TNSR"
constexpr std::uint16_t kVersion = 1;
constexpr Index kMaxElements = Index{1} << 40;

[[noreturn]] void fail(const std::filesystem::path& path, const std::string& why) {
    throw std::runtime_error(path.string() + ": " + why);
}

void put_bytes(std::ostream& os, const void* data, std::size_t n) {
    os.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
}

void put_u16(std::ostream& os, std::uint16_t v) {
    const std::uint8_t b[2] = {static_cast<std::uint8_t>(v & 0xFF), static_cast<std::uint8_t>(v >> 8)};
    put_bytes(os, b, 2);
}

void put_u64(std::ostream& os, std::uint64_t v) {
    std::uint8_t b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF);
    put_bytes(os, b, 8);
}

void put_f64(std::ostream& os, double v) { put_u64(os, std::bit_cast<std::uint64_t>(v)); }

struct Reader {
    std::ifstream in;
    const std::filesystem::path& path;

    void bytes(void* dst, std::size_t n) {
        in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
        if (in.gcount() != static_cast<std::streamsize>(n)) fail(path, "truncated file");
    }
    std::uint16_t u16() {
        std::uint8_t b[2];
        bytes(b, 2);
        return static_cast<std::uint16_t>(b[0] | (std::uint16_t(b[1]) << 8));
    }
    std::uint64_t u64() {
        std::uint8_t b[8];
        bytes(b, 8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[i]) << (8 * i);
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
};

}  // namespace

std::string format_csv_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

void write_tnsr(const std::filesystem::path& path, const DenseTensor& t) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) fail(path, "cannot open for writing");
    put_bytes(os, kMagic, 4);
    put_u16(os, kVersion);
    put_u16(os, static_cast<std::uint16_t>(t.order()));
    for (Index d : t.shape()) put_u64(os, static_cast<std::uint64_t>(d));
    for (double v : t.values()) put_f64(os, v);
    os.flush();
    if (!os) fail(path, "write failed");
}

DenseTensor read_tnsr(const std::filesystem::path& path) {
    Reader r{std::ifstream(path, std::ios::binary), path};
    if (!r.in) fail(path, "cannot open for reading");

    std::uint8_t magic[4];
    r.bytes(magic, 4);
    for (int i = 0; i < 4; ++i) {
        if (magic[i] != kMagic[i]) fail(path, "bad magic, not a TNSR file");
    }
    const std::uint16_t version = r.u16();
    if (version != kVersion) fail(path, "unsupported TNSR version " + std::to_string(version));
    const std::uint16_t order = r.u16();
    if (order == 0) fail(path, "tensor order must be at least 1");

    Shape shape(order);
    Index count = 1;
    for (std::uint16_t n = 0; n < order; ++n) {
        const std::uint64_t d = r.u64();
        if (d == 0) fail(path, "zero dimension in header");
        shape[n] = static_cast<Index>(d);
        count *= shape[n];
        if (count <= 0 || count > kMaxElements) fail(path, "element count out of range");
    }

    std::vector<double> values(static_cast<std::size_t>(count));
    for (double& v : values) v = r.f64();
    char extra;
    r.in.read(&extra, 1);
    if (r.in.gcount() != 0) fail(path, "trailing bytes after tensor payload");
    return DenseTensor(std::move(shape), std::move(values));
}

void write_matrix_tnsr(const std::filesystem::path& path, const Matrix& m) {
    write_tnsr(path, matrix_to_tensor(m));
}

Matrix read_matrix_tnsr(const std::filesystem::path& path) {
    const DenseTensor t = read_tnsr(path);
    if (t.order() != 2) fail(path, "expected an order-2 tensor, got order " + std::to_string(t.order()));
    return tensor_to_matrix(t);
}

void write_matrix_csv(const std::filesystem::path& path, const Matrix& m) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) fail(path, "cannot open for writing");
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) {
            if (j > 0) os << ',';
            os << format_csv_double(m(i, j));
        }
        os << '\n';
    }
    os.flush();
    if (!os) fail(path, "write failed");
}

Matrix read_matrix_csv(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) fail(path, "cannot open for reading");
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() && is.peek() == std::char_traits<char>::eof()) break;
        std::vector<double> row;
        std::size_t pos = 0;
        while (true) {
            const std::size_t comma = line.find(',', pos);
            const std::string_view field(line.data() + pos, (comma == std::string::npos ? line.size() : comma) - pos);
            double value = 0.0;
            const auto res = std::from_chars(field.data(), field.data() + field.size(), value);
            if (res.ec != std::errc{} || res.ptr != field.data() + field.size()) {
                fail(path, "unparsable CSV field '" + std::string(field) + "'");
            }
            row.push_back(value);
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
        if (!rows.empty() && row.size() != rows.front().size()) {
            fail(path, "ragged CSV rows");
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) return Matrix(0, 0);
    Matrix out(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
    for (Index i = 0; i < out.rows(); ++i) {
        for (Index j = 0; j < out.cols(); ++j) {
            out(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        }
    }
    return out;
}

}  // namespace cfuse
