#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "fairscrub/matrix.hpp"
#include "fairscrub/ops.hpp"

namespace fairscrub {

// Representation dump layout (all integers little-endian):
//   bytes 0..7    magic "FSREPDMP"
//   bytes 8..15   u64 row count
//   bytes 16..23  u64 dimension
//   bytes 24..31  dtype tag "f64" padded with NUL
//   then rows * dim IEEE-754 binary64 values, row-major.
inline constexpr char kRepDumpMagic[8] = {'F', 'S', 'R', 'E', 'P', 'D', 'M', 'P'};

std::string encode_rep_dump(const Matrix& reps);
Matrix decode_rep_dump(const std::string& bytes);

void write_rep_dump(const std::filesystem::path& path, const Matrix& reps);
Matrix read_rep_dump(const std::filesystem::path& path);

/// One integer label per line.
void write_labels_csv(const std::filesystem::path& path, const std::vector<Label>& labels);
std::vector<Label> read_labels_csv(const std::filesystem::path& path);

}  // namespace fairscrub
