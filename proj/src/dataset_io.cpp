#include "cpl/dataset_io.hpp"

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "cpl/errors.hpp"

namespace cpl {

namespace {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

[[noreturn]] void line_error(std::size_t line, const std::string& what) {
  throw IoError("line " + std::to_string(line) + ": " + what);
}

double parse_double(const std::string& text, std::size_t line) {
  const char* begin = text.c_str();
  char* end = nullptr;
  double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0') line_error(line, "bad number '" + text + "'");
  return v;
}

long parse_long(const std::string& text, std::size_t line) {
  const char* begin = text.c_str();
  char* end = nullptr;
  long v = std::strtol(begin, &end, 10);
  if (end == begin || *end != '\0') line_error(line, "bad integer '" + text + "'");
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string::size_type start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

}  // namespace

void write_dataset(const PartialDataset& d, std::ostream& os) {
  // Refuse to emit files the reader would reject.
  auto violations = validate_dataset(d);
  if (!violations.empty()) {
    throw ConfigError("cannot write invalid dataset: " + violations.front());
  }
  const bool oracle = d.oracle_mode();
  os << "K=" << d.num_classes << ",dim=" << d.dim()
     << ",oracle=" << (oracle ? 1 : 0) << "\n";
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    for (Eigen::Index c = 0; c < d.dim(); ++c) {
      if (c > 0) os << ',';
      os << format_double(d.features(i, c));
    }
    os << '|';
    const auto& ids = d.candidates[static_cast<std::size_t>(i)].ids();
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (k > 0) os << ';';
      os << ids[k];
    }
    if (oracle) os << '|' << (*d.hidden_truths)[static_cast<std::size_t>(i)];
    os << "\n";
  }
  if (!os) throw IoError("write failed");
}

PartialDataset read_dataset(std::istream& is) {
  std::string header;
  if (!std::getline(is, header)) throw IoError("line 1: missing header");
  int num_classes = 0;
  long long dim = 0;
  int oracle_flag = -1;
  if (std::sscanf(header.c_str(), "K=%d,dim=%lld,oracle=%d", &num_classes, &dim,
                  &oracle_flag) != 3 ||
      (oracle_flag != 0 && oracle_flag != 1)) {
    throw IoError("line 1: bad header '" + header + "'");
  }
  if (num_classes < 2) throw IoError("line 1: K < 2");
  if (dim < 1) throw IoError("line 1: dim < 1");

  std::vector<std::vector<double>> rows;
  std::vector<CandidateSet> candidates;
  std::vector<LabelId> truths;
  std::string line;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto fields = split(line, '|');
    const std::size_t expected = oracle_flag ? 3 : 2;
    if (fields.size() != expected) {
      line_error(lineno, "expected " + std::to_string(expected) +
                             " fields, got " + std::to_string(fields.size()));
    }

    std::vector<double> feats;
    for (const auto& tok : split(fields[0], ',')) {
      feats.push_back(parse_double(tok, lineno));
    }
    if (static_cast<long long>(feats.size()) != dim) {
      line_error(lineno, "expected " + std::to_string(dim) + " features, got " +
                             std::to_string(feats.size()));
    }

    std::vector<LabelId> ids;
    if (fields[1].empty()) line_error(lineno, "empty candidate set");
    for (const auto& tok : split(fields[1], ';')) {
      long y = parse_long(tok, lineno);
      if (y < 0 || y >= num_classes) {
        line_error(lineno, "candidate " + std::to_string(y) + " out of range");
      }
      ids.push_back(static_cast<LabelId>(y));
    }
    CandidateSet set(ids);

    if (oracle_flag) {
      long y = parse_long(fields[2], lineno);
      if (y < 0 || y >= num_classes) {
        line_error(lineno, "truth " + std::to_string(y) + " out of range");
      }
      if (!set.contains(static_cast<LabelId>(y))) {
        line_error(lineno, "truth not in candidate set");
      }
      truths.push_back(static_cast<LabelId>(y));
    }
    rows.push_back(std::move(feats));
    candidates.push_back(std::move(set));
  }
  if (rows.empty()) throw IoError("dataset has no instances");

  PartialDataset d;
  d.num_classes = num_classes;
  d.features.resize(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (long long c = 0; c < dim; ++c) {
      d.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
          rows[i][static_cast<std::size_t>(c)];
    }
  }
  d.candidates = std::move(candidates);
  if (oracle_flag) d.hidden_truths = std::move(truths);
  d.ids.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    d.ids[i] = static_cast<std::int64_t>(i);
  }
  return d;
}

void save_dataset(const PartialDataset& d, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError(path + ": cannot open for writing");
  write_dataset(d, os);
  os.flush();
  if (!os) throw IoError(path + ": write failed");
}

PartialDataset load_dataset(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError(path + ": cannot open");
  try {
    return read_dataset(is);
  } catch (const IoError& e) {
    throw IoError(path + ": " + e.what());
  }
}

namespace {

std::uint32_t read_be32(std::istream& is, const std::string& path) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) {
    throw IoError(path + ": truncated");
  }
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
         (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

}  // namespace

PartialDataset load_idx(const std::string& images_path,
                        const std::string& labels_path) {
  std::ifstream imgs(images_path, std::ios::binary);
  if (!imgs) throw IoError(images_path + ": cannot open");
  if (read_be32(imgs, images_path) != 0x00000803u) {
    throw IoError(images_path + ": bad image magic");
  }
  const std::uint32_t count = read_be32(imgs, images_path);
  const std::uint32_t rows = read_be32(imgs, images_path);
  const std::uint32_t cols = read_be32(imgs, images_path);
  if (count == 0 || rows == 0 || cols == 0) {
    throw IoError(images_path + ": empty image file");
  }

  std::ifstream labs(labels_path, std::ios::binary);
  if (!labs) throw IoError(labels_path + ": cannot open");
  if (read_be32(labs, labels_path) != 0x00000801u) {
    throw IoError(labels_path + ": bad label magic");
  }
  if (read_be32(labs, labels_path) != count) {
    throw IoError(labels_path + ": label count mismatch");
  }

  const std::size_t pixels = std::size_t(rows) * std::size_t(cols);
  std::vector<unsigned char> img_buf(pixels);
  PartialDataset d;
  d.features.resize(static_cast<Eigen::Index>(count),
                    static_cast<Eigen::Index>(pixels));
  std::vector<LabelId> truths(count);
  LabelId max_label = 0;
  for (std::uint32_t i = 0; i < count; ++i) {
    if (!imgs.read(reinterpret_cast<char*>(img_buf.data()),
                   static_cast<std::streamsize>(pixels))) {
      throw IoError(images_path + ": truncated");
    }
    for (std::size_t p = 0; p < pixels; ++p) {
      d.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(p)) =
          double(img_buf[p]) / 255.0;
    }
    char lab = 0;
    if (!labs.read(&lab, 1)) throw IoError(labels_path + ": truncated");
    truths[i] = static_cast<LabelId>(static_cast<unsigned char>(lab));
    max_label = std::max(max_label, truths[i]);
  }

  d.num_classes = std::max(2, int(max_label) + 1);
  d.candidates.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    d.candidates.push_back(CandidateSet::singleton(truths[i]));
  }
  d.hidden_truths = std::move(truths);
  d.ids.resize(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    d.ids[i] = static_cast<std::int64_t>(i);
  }
  return d;
}

}  // namespace cpl
