#include "cf/binio.hpp"

#include <cstdio>
#include <fstream>
#include <iterator>

namespace cf::bin {

void Writer::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw RuntimeFailure("cannot open for writing: " + path.string());
    }
    out.write(reinterpret_cast<const char*>(buf_.data()), static_cast<std::streamsize>(buf_.size()));
    if (!out) {
        throw RuntimeFailure("write failed: " + path.string());
    }
}

Reader Reader::from_file(const std::filesystem::path& path) {
    return Reader(read_file(path), path.string());
}

void Reader::expect_magic(std::string_view magic) {
    if (remaining() < magic.size()) {
        throw FormatError("truncated header" + (origin_.empty() ? "" : " in " + origin_));
    }
    if (std::memcmp(buf_.data() + pos_, magic.data(), magic.size()) != 0) {
        throw FormatError("bad magic, expected \"" + std::string(magic) + "\"" +
                          (origin_.empty() ? "" : " in " + origin_));
    }
    pos_ += magic.size();
}

const std::uint8_t* Reader::take(std::size_t n) {
    if (remaining() < n) {
        throw FormatError("truncated file" + (origin_.empty() ? "" : ": " + origin_));
    }
    const auto* p = buf_.data() + pos_;
    pos_ += n;
    return p;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ValidationError("missing artifact: " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string read_text(const std::filesystem::path& path) {
    auto bytes = read_file(path);
    return {bytes.begin(), bytes.end()};
}

void write_text(const std::filesystem::path& path, std::string_view text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw RuntimeFailure("cannot open for writing: " + path.string());
    }
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

std::string fnv1a_hex(std::span<const std::uint8_t> bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (auto b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
    }
    char out[17];
    std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
    return out;
}

std::string file_hash(const std::filesystem::path& path) {
    auto bytes = read_file(path);
    return fnv1a_hex(bytes);
}

}  // namespace cf::bin
