#include "cf/recording_io.hpp"

#include <nlohmann/json.hpp>

#include "cf/binio.hpp"
#include "cf/error.hpp"

namespace cf {

using nlohmann::json;

std::filesystem::path with_suffix(const std::filesystem::path& stem, const std::string& suffix) {
    return std::filesystem::path(stem.string() + suffix);
}

namespace {

bin::Writer header(std::uint32_t rows, std::uint32_t row_len, MatrixDtype dtype) {
    bin::Writer w;
    w.put_magic("CFRC");
    w.put<std::uint16_t>(kRecordingVersion);
    w.put<std::uint32_t>(rows);
    w.put<std::uint32_t>(row_len);
    w.put<std::uint16_t>(static_cast<std::uint16_t>(dtype));
    return w;
}

void check_size(std::uint32_t rows, std::uint32_t row_len, std::size_t n) {
    if (static_cast<std::size_t>(rows) * row_len != n) {
        throw ValidationError("matrix shape does not match value count");
    }
}

}  // namespace

void write_matrix(const std::filesystem::path& path, std::uint32_t rows, std::uint32_t row_len,
                  const std::vector<float>& values) {
    check_size(rows, row_len, values.size());
    auto w = header(rows, row_len, MatrixDtype::f32);
    w.put_span(std::span<const float>(values));
    w.save(path);
}

void write_matrix(const std::filesystem::path& path, std::uint32_t rows, std::uint32_t row_len,
                  const std::vector<std::uint8_t>& values) {
    check_size(rows, row_len, values.size());
    auto w = header(rows, row_len, MatrixDtype::u8);
    w.put_span(std::span<const std::uint8_t>(values));
    w.save(path);
}

MatrixFile read_matrix(const std::filesystem::path& path) {
    auto r = bin::Reader::from_file(path);
    r.expect_magic("CFRC");
    const auto version = r.get<std::uint16_t>();
    if (version != kRecordingVersion) {
        throw FormatError("unsupported recording version " + std::to_string(version) + " in " + path.string());
    }
    MatrixFile m;
    m.rows = r.get<std::uint32_t>();
    m.row_len = r.get<std::uint32_t>();
    const auto dtype = r.get<std::uint16_t>();
    const std::size_t n = static_cast<std::size_t>(m.rows) * m.row_len;
    if (dtype == static_cast<std::uint16_t>(MatrixDtype::f32)) {
        m.dtype = MatrixDtype::f32;
        m.f32.resize(n);
        r.get_bytes(m.f32.data(), n * sizeof(float));
    } else if (dtype == static_cast<std::uint16_t>(MatrixDtype::u8)) {
        m.dtype = MatrixDtype::u8;
        m.u8.resize(n);
        r.get_bytes(m.u8.data(), n);
    } else {
        throw FormatError("unknown matrix dtype " + std::to_string(dtype) + " in " + path.string());
    }
    if (!r.at_end()) {
        throw FormatError("trailing bytes in " + path.string());
    }
    return m;
}

void save_recording(const std::filesystem::path& stem, const StateRecording& rec, int k, int l,
                    const std::vector<std::string>& warnings) {
    write_matrix(with_suffix(stem, ".cfrc"), static_cast<std::uint32_t>(rec.rows()),
                 static_cast<std::uint32_t>(rec.row_len), rec.data);
    json side{{"element_ids", rec.element_ids}, {"k", k}, {"l", l}, {"m", rec.period}, {"warnings", warnings}};
    bin::write_text(with_suffix(stem, ".json"), side.dump(1) + "\n");
}

RecordingFile load_recording(const std::filesystem::path& stem) {
    RecordingFile out;
    auto m = read_matrix(with_suffix(stem, ".cfrc"));
    if (m.dtype != MatrixDtype::f32) {
        throw FormatError("recording must hold f32 values: " + stem.string());
    }
    json side;
    try {
        side = json::parse(bin::read_text(with_suffix(stem, ".json")));
        out.recording.element_ids = side.at("element_ids").get<std::vector<std::int32_t>>();
        out.k = side.at("k").get<int>();
        out.l = side.at("l").get<int>();
        out.recording.period = side.at("m").get<int>();
        out.warnings = side.value("warnings", std::vector<std::string>{});
    } catch (const json::exception& e) {
        throw FormatError("recording sidecar " + stem.string() + ": " + e.what());
    }
    if (out.recording.element_ids.size() != m.rows) {
        throw ValidationError("recording sidecar lists " + std::to_string(out.recording.element_ids.size()) +
                              " elements but matrix has " + std::to_string(m.rows) + " rows");
    }
    out.recording.row_len = static_cast<int>(m.row_len);
    out.recording.data = std::move(m.f32);
    return out;
}

}  // namespace cf
