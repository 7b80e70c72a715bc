#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

namespace isaclab {

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Little-endian writer, independent of host byte order.
class ByteWriter {
public:
    void put_bytes(const char* data, std::size_t n) { buf_.insert(buf_.end(), data, data + n); }
    void put_u32(std::uint32_t v) { put_le(v, 4); }
    void put_u64(std::uint64_t v) { put_le(v, 8); }
    void put_f64(double v) { put_le(std::bit_cast<std::uint64_t>(v), 8); }

    template <class Range>
    void put_f64s(const Range& r)
    {
        for (double v : r) {
            put_f64(v);
        }
    }

    const std::vector<std::uint8_t>& bytes() const { return buf_; }
    std::vector<std::uint8_t> take() { return std::move(buf_); }

private:
    void put_le(std::uint64_t v, int n)
    {
        for (int i = 0; i < n; ++i) {
            buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
        }
    }

    std::vector<std::uint8_t> buf_;
};

class ByteReader {
public:
    explicit ByteReader(const std::vector<std::uint8_t>& buf) : buf_(buf) {}

    void expect_bytes(const char* data, std::size_t n, const std::string& what)
    {
        need(n);
        if (std::memcmp(buf_.data() + pos_, data, n) != 0) {
            throw FormatError("bad " + what);
        }
        pos_ += n;
    }
    std::uint32_t get_u32() { return static_cast<std::uint32_t>(get_le(4)); }
    std::uint64_t get_u64() { return get_le(8); }
    double get_f64() { return std::bit_cast<double>(get_le(8)); }
    std::vector<std::uint8_t> get_bytes(std::size_t n)
    {
        need(n);
        std::vector<std::uint8_t> out(buf_.begin() + static_cast<std::ptrdiff_t>(pos_),
                                      buf_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
        pos_ += n;
        return out;
    }
    bool at_end() const { return pos_ == buf_.size(); }

private:
    void need(std::size_t n) const
    {
        if (pos_ + n > buf_.size()) {
            throw FormatError("unexpected end of data");
        }
    }
    std::uint64_t get_le(int n)
    {
        need(static_cast<std::size_t>(n));
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) {
            v |= static_cast<std::uint64_t>(buf_[pos_ + i]) << (8 * i);
        }
        pos_ += static_cast<std::size_t>(n);
        return v;
    }

    const std::vector<std::uint8_t>& buf_;
    std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes);

} // namespace isaclab
