#include "fairscrub/repdump.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "fairscrub/error.hpp"

namespace fairscrub {
namespace {

static_assert(std::endian::native == std::endian::little,
              "representation dumps assume a little-endian host");

constexpr char kDtype[8] = {'f', '6', '4', 0, 0, 0, 0, 0};
constexpr std::size_t kHeaderBytes = 32;

void put_u64(std::string& out, std::uint64_t v) {
  char buf[8];
  std::memcpy(buf, &v, 8);
  out.append(buf, 8);
}

std::uint64_t get_u64(const std::string& bytes, std::size_t offset) {
  std::uint64_t v = 0;
  std::memcpy(&v, bytes.data() + offset, 8);
  return v;
}

}  // namespace

std::string encode_rep_dump(const Matrix& reps) {
  std::string out;
  out.reserve(kHeaderBytes + reps.size() * sizeof(double));
  out.append(kRepDumpMagic, 8);
  put_u64(out, reps.rows());
  put_u64(out, reps.cols());
  out.append(kDtype, 8);
  out.append(reinterpret_cast<const char*>(reps.data().data()), reps.size() * sizeof(double));
  return out;
}

Matrix decode_rep_dump(const std::string& bytes) {
  if (bytes.size() < kHeaderBytes || std::memcmp(bytes.data(), kRepDumpMagic, 8) != 0) {
    throw ConfigError("representation dump: bad magic");
  }
  if (std::memcmp(bytes.data() + 24, kDtype, 8) != 0) {
    throw ConfigError("representation dump: unsupported dtype (expected f64)");
  }
  const auto rows = get_u64(bytes, 8);
  const auto cols = get_u64(bytes, 16);
  if (cols != 0 && rows > (bytes.size() / sizeof(double)) / cols + 1) {
    throw ConfigError("representation dump: header does not match payload");
  }
  if (bytes.size() != kHeaderBytes + rows * cols * sizeof(double)) {
    throw ConfigError("representation dump: payload length does not match header");
  }
  std::vector<double> data(rows * cols);
  std::memcpy(data.data(), bytes.data() + kHeaderBytes, data.size() * sizeof(double));
  return Matrix(rows, cols, std::move(data));
}

void write_rep_dump(const std::filesystem::path& path, const Matrix& reps) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  const auto bytes = encode_rep_dump(reps);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

Matrix read_rep_dump(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return decode_rep_dump(buf.str());
}

void write_labels_csv(const std::filesystem::path& path, const std::vector<Label>& labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (Label v : labels) out << v << '\n';
}

std::vector<Label> read_labels_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<Label> labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    try {
      std::size_t used = 0;
      const int v = std::stoi(line, &used);
      if (used != line.size() || v < 0) throw std::invalid_argument(line);
      labels.push_back(v);
    } catch (const std::exception&) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": not a label: " + line);
    }
  }
  return labels;
}

}  // namespace fairscrub
