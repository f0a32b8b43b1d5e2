#include "jpis/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

#include "jpis/errors.hpp"

namespace jpis {
namespace {

constexpr std::string_view kMagic = "JPIS-CHECKPOINT 1";

void put_le(std::ostream& out, double v) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  out.write(bytes, 8);
}

double get_le(const char* bytes) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) {
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[i])) << (8 * i);
  }
  return std::bit_cast<double>(bits);
}

std::string read_line(std::istream& in, const char* what) {
  std::string line;
  if (!std::getline(in, line)) {
    throw ValidationError(std::string("checkpoint: truncated before ") + what);
  }
  return line;
}

std::size_t expect_count(const std::string& line, std::string_view keyword) {
  std::istringstream ss(line);
  std::string word;
  std::size_t n = 0;
  if (!(ss >> word >> n) || word != keyword) {
    throw ValidationError("checkpoint: expected '" + std::string(keyword) +
                          " <n>', got '" + line + "'");
  }
  return n;
}

}  // namespace

void write_parameters(std::ostream& out, const ParameterStore& params,
                      std::string_view metadata) {
  out << kMagic << '\n';
  out << "metadata " << metadata.size() << '\n';
  out.write(metadata.data(), static_cast<std::streamsize>(metadata.size()));
  out << '\n';
  out << "parameters " << params.size() << '\n';
  std::size_t offset = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Parameter& p = params[i];
    if (p.name.empty() || p.name.find_first_of(" \t\n") != std::string::npos) {
      throw ValidationError("checkpoint: parameter name must be non-empty "
                            "without whitespace: '" + p.name + "'");
    }
    out << p.name << " f64 " << p.value.rank();
    for (std::size_t d : p.value.shape().dims()) out << ' ' << d;
    out << ' ' << offset << '\n';
    offset += p.value.numel() * 8;
  }
  out << "data " << offset << '\n';
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (double v : params[i].value.data()) put_le(out, v);
  }
  if (!out) throw ValidationError("checkpoint: write failed");
}

ParameterArchive read_parameters(std::istream& in) {
  if (read_line(in, "header") != kMagic) {
    throw ValidationError("checkpoint: bad magic line");
  }
  ParameterArchive archive;
  const std::size_t meta_bytes = expect_count(read_line(in, "metadata"), "metadata");
  archive.metadata.resize(meta_bytes);
  in.read(archive.metadata.data(), static_cast<std::streamsize>(meta_bytes));
  if (in.get() != '\n') throw ValidationError("checkpoint: corrupt metadata block");

  struct Entry {
    std::string name;
    std::vector<std::size_t> dims;
    std::size_t offset;
  };
  const std::size_t count = expect_count(read_line(in, "manifest"), "parameters");
  std::vector<Entry> entries;
  for (std::size_t i = 0; i < count; ++i) {
    const std::string line = read_line(in, "manifest entry");
    std::istringstream ss(line);
    Entry e;
    std::string dtype;
    std::size_t rank = 0;
    if (!(ss >> e.name >> dtype >> rank) || dtype != "f64" || rank == 0 || rank > 4) {
      throw ValidationError("checkpoint: bad manifest entry '" + line + "'");
    }
    e.dims.resize(rank);
    for (std::size_t& d : e.dims) {
      if (!(ss >> d)) throw ValidationError("checkpoint: bad manifest entry '" + line + "'");
    }
    if (!(ss >> e.offset)) throw ValidationError("checkpoint: bad manifest entry '" + line + "'");
    entries.push_back(std::move(e));
  }
  const std::size_t data_bytes = expect_count(read_line(in, "payload"), "data");
  std::vector<char> payload(data_bytes);
  in.read(payload.data(), static_cast<std::streamsize>(data_bytes));
  if (static_cast<std::size_t>(in.gcount()) != data_bytes) {
    throw ValidationError("checkpoint: truncated payload");
  }
  for (const Entry& e : entries) {
    Shape shape{std::span<const std::size_t>(e.dims)};
    const std::size_t n = shape.numel();
    if (e.offset + n * 8 > data_bytes) {
      throw ValidationError("checkpoint: parameter " + e.name + " exceeds payload");
    }
    std::vector<double> values(n);
    for (std::size_t k = 0; k < n; ++k) values[k] = get_le(payload.data() + e.offset + 8 * k);
    archive.params.add(e.name, Tensor(shape, std::move(values)));
  }
  return archive;
}

void save_parameters(const std::filesystem::path& path,
                     const ParameterStore& params, std::string_view metadata) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open for writing: " + path.string());
  write_parameters(out, params, metadata);
}

ParameterArchive load_parameters(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open checkpoint: " + path.string());
  return read_parameters(in);
}

}  // namespace jpis
