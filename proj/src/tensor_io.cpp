#include "adaradar/tensor_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace adaradar {

namespace {

constexpr std::array<char, 4> kMagic{'A', 'D', 'R', 'T'};

template <typename U>
void put_le(std::ostream& os, U v)
{
    std::array<char, sizeof(U)> buf{};
    for (std::size_t i = 0; i < sizeof(U); ++i) {
        buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    }
    os.write(buf.data(), buf.size());
}

template <typename U>
U get_le(std::istream& is)
{
    std::array<unsigned char, sizeof(U)> buf{};
    is.read(reinterpret_cast<char*>(buf.data()), buf.size());
    if (!is) {
        throw std::runtime_error("truncated tensor blob");
    }
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
        v |= static_cast<U>(buf[i]) << (8 * i);
    }
    return v;
}

} // namespace

void write_tensor(std::ostream& os, const Tensor& t, DType dtype)
{
    if (t.empty()) {
        throw std::invalid_argument("cannot serialize an empty tensor");
    }
    if (t.rank() > 255) {
        throw std::invalid_argument("tensor rank exceeds format limit");
    }
    os.write(kMagic.data(), kMagic.size());
    put_le<std::uint8_t>(os, kTensorFormatVersion);
    put_le<std::uint8_t>(os, static_cast<std::uint8_t>(dtype));
    put_le<std::uint8_t>(os, static_cast<std::uint8_t>(t.rank()));
    for (auto d : t.shape()) {
        put_le<std::uint64_t>(os, d);
    }
    for (double v : t.data()) {
        if (dtype == DType::F64) {
            put_le<std::uint64_t>(os, std::bit_cast<std::uint64_t>(v));
        } else {
            put_le<std::uint32_t>(os, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
        }
    }
    if (!os) {
        throw std::runtime_error("tensor write failed");
    }
}

Tensor read_tensor(std::istream& is)
{
    std::array<char, 4> magic{};
    is.read(magic.data(), magic.size());
    if (!is || magic != kMagic) {
        throw std::runtime_error("bad tensor magic");
    }
    auto version = get_le<std::uint8_t>(is);
    if (version != kTensorFormatVersion) {
        throw std::runtime_error("unsupported tensor format version " + std::to_string(version));
    }
    auto dtype = get_le<std::uint8_t>(is);
    if (dtype > 1) {
        throw std::runtime_error("unknown tensor dtype " + std::to_string(dtype));
    }
    auto rank = get_le<std::uint8_t>(is);
    if (rank == 0) {
        throw std::runtime_error("tensor rank must be positive");
    }
    Shape shape(rank);
    std::size_t total = 1;
    for (auto& d : shape) {
        auto v = get_le<std::uint64_t>(is);
        if (v == 0 || v > (std::uint64_t{1} << 40)) {
            throw std::runtime_error("implausible tensor dimension " + std::to_string(v));
        }
        d = static_cast<std::size_t>(v);
        total *= d;
        if (total > (std::size_t{1} << 34)) {
            throw std::runtime_error("tensor too large");
        }
    }
    std::vector<double> data(total);
    for (auto& v : data) {
        if (dtype == 1) {
            v = std::bit_cast<double>(get_le<std::uint64_t>(is));
        } else {
            v = static_cast<double>(std::bit_cast<float>(get_le<std::uint32_t>(is)));
        }
    }
    return Tensor(std::move(shape), std::move(data));
}

void save_tensor(const std::filesystem::path& path, const Tensor& t, DType dtype)
{
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    }
    try {
        write_tensor(os, t, dtype);
    } catch (const std::exception& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

Tensor load_tensor(const std::filesystem::path& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw std::runtime_error("cannot open " + path.string());
    }
    try {
        Tensor t = read_tensor(is);
        if (is.peek() != std::char_traits<char>::eof()) {
            throw std::runtime_error("trailing bytes after tensor blob");
        }
        return t;
    } catch (const std::exception& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

} // namespace adaradar
