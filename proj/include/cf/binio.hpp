#pragma once

// Little-endian binary helpers shared by the recording, dataset and checkpoint containers.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cf/error.hpp"

namespace cf::bin {

static_assert(std::endian::native == std::endian::little, "big-endian hosts are not supported");

class Writer {
public:
    template <typename T>
    void put(T value) {
        static_assert(std::is_trivially_copyable_v<T>);
        const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
        buf_.insert(buf_.end(), p, p + sizeof(T));
    }

    void put_bytes(const void* data, std::size_t n) {
        const auto* p = static_cast<const std::uint8_t*>(data);
        buf_.insert(buf_.end(), p, p + n);
    }

    void put_magic(std::string_view magic) { put_bytes(magic.data(), magic.size()); }

    template <typename T>
    void put_span(std::span<const T> values) {
        put_bytes(values.data(), values.size_bytes());
    }

    const std::vector<std::uint8_t>& bytes() const { return buf_; }

    void save(const std::filesystem::path& path) const;

private:
    std::vector<std::uint8_t> buf_;
};

class Reader {
public:
    explicit Reader(std::vector<std::uint8_t> bytes, std::string origin = {})
        : buf_(std::move(bytes)), origin_(std::move(origin)) {}

    static Reader from_file(const std::filesystem::path& path);

    template <typename T>
    T get() {
        T value;
        std::memcpy(&value, take(sizeof(T)), sizeof(T));
        return value;
    }

    void get_bytes(void* out, std::size_t n) { std::memcpy(out, take(n), n); }

    void expect_magic(std::string_view magic);

    std::size_t remaining() const { return buf_.size() - pos_; }
    bool at_end() const { return pos_ == buf_.size(); }

private:
    const std::uint8_t* take(std::size_t n);

    std::vector<std::uint8_t> buf_;
    std::size_t pos_ = 0;
    std::string origin_;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);

// FNV-1a 64-bit, rendered as 16 hex digits. Used for provenance, not security.
std::string fnv1a_hex(std::span<const std::uint8_t> bytes);
std::string file_hash(const std::filesystem::path& path);

}  // namespace cf::bin
