#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cf/sim.hpp"

namespace cf {

// 16-byte container header: "CFRC", version u16, rows u32, row_len u32, dtype u16
// (the reserved slot: 0 = f32, 1 = u8), then row-major little-endian values.
enum class MatrixDtype : std::uint16_t { f32 = 0, u8 = 1 };

inline constexpr std::uint16_t kRecordingVersion = 1;

struct MatrixFile {
    std::uint32_t rows = 0;
    std::uint32_t row_len = 0;
    MatrixDtype dtype = MatrixDtype::f32;
    std::vector<float> f32;
    std::vector<std::uint8_t> u8;
};

void write_matrix(const std::filesystem::path& path, std::uint32_t rows, std::uint32_t row_len,
                  const std::vector<float>& values);
void write_matrix(const std::filesystem::path& path, std::uint32_t rows, std::uint32_t row_len,
                  const std::vector<std::uint8_t>& values);
MatrixFile read_matrix(const std::filesystem::path& path);

struct RecordingFile {
    StateRecording recording;
    int k = 0;
    int l = 0;
    std::vector<std::string> warnings;
};

// Writes <stem>.cfrc and the sidecar <stem>.json (element_ids, k, l, m, warnings).
void save_recording(const std::filesystem::path& stem, const StateRecording& rec, int k, int l,
                    const std::vector<std::string>& warnings);
RecordingFile load_recording(const std::filesystem::path& stem);

std::filesystem::path with_suffix(const std::filesystem::path& stem, const std::string& suffix);

}  // namespace cf
