#include "uforge/dataset.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "uforge/errors.hpp"
#include "uforge/rng.hpp"

namespace uforge::data {

void LabeledDataset::validate() const {
  if (features.rows() != labels.size()) {
    throw InvalidInputError("LabeledDataset: feature rows != label count");
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= class_count) {
      throw InvalidInputError("LabeledDataset: label " + std::to_string(y) +
                              " outside class count " + std::to_string(class_count));
    }
  }
}

LabeledDataset LabeledDataset::select(const std::vector<std::size_t>& indices,
                                      std::string new_name) const {
  LabeledDataset out;
  out.features = Tensor2D(indices.size(), features.cols());
  out.labels.reserve(indices.size());
  out.class_count = class_count;
  out.name = std::move(new_name);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const std::size_t src = indices[i];
    if (src >= size()) {
      throw InvalidInputError("LabeledDataset::select: index out of range");
    }
    for (std::size_t c = 0; c < features.cols(); ++c) {
      out.features.at(i, c) = features.at(src, c);
    }
    out.labels.push_back(labels[src]);
  }
  return out;
}

namespace {

// Class means live in a stream keyed only by (seed, class), so datasets that
// share a seed share means regardless of per_class or spread.
std::vector<double> class_mean(std::size_t cls, std::size_t dim, std::uint64_t seed) {
  CounterRng rng(seed, "gauss/mean/" + std::to_string(cls));
  std::vector<double> mean(dim);
  for (double& v : mean) v = rng.next_uniform(-1.0, 1.0);
  return mean;
}

LabeledDataset make_blobs(std::size_t class_count, std::size_t dim,
                          std::size_t per_class, double spread, std::uint64_t seed,
                          std::string name, const std::string& noise_stream) {
  if (class_count < 2) throw InvalidInputError("make_synthetic_gaussian: need >= 2 classes");
  if (per_class < 1) throw InvalidInputError("make_synthetic_gaussian: per_class must be >= 1");

  LabeledDataset out;
  out.features = Tensor2D(class_count * per_class, dim);
  out.labels.reserve(class_count * per_class);
  out.class_count = class_count;
  out.name = std::move(name);

  for (std::size_t cls = 0; cls < class_count; ++cls) {
    const std::vector<double> mean = class_mean(cls, dim, seed);
    CounterRng noise(seed, noise_stream + std::to_string(cls));
    for (std::size_t i = 0; i < per_class; ++i) {
      const std::size_t row = cls * per_class + i;
      for (std::size_t d = 0; d < dim; ++d) {
        out.features.at(row, d) = mean[d] + spread * noise.next_gaussian();
      }
      out.labels.push_back(static_cast<int>(cls));
    }
  }
  return out;
}

}  // namespace

LabeledDataset make_synthetic_gaussian(std::size_t class_count, std::size_t dim,
                                       std::size_t per_class, double spread,
                                       std::uint64_t seed, std::string name) {
  return make_blobs(class_count, dim, per_class, spread, seed, std::move(name),
                    "gauss/noise/train/");
}

LabeledDataset make_synthetic_gaussian_like(std::size_t class_count, std::size_t dim,
                                            std::size_t per_class, double spread,
                                            std::uint64_t seed, std::string name) {
  return make_blobs(class_count, dim, per_class, spread, seed, std::move(name),
                    "gauss/noise/test/");
}

LabeledDataset load_csv_dataset(const std::filesystem::path& path,
                                std::size_t class_count) {
  std::ifstream is(path);
  if (!is) throw IoError("load_csv_dataset: cannot open " + path.string());

  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  std::size_t dim = 0;
  std::string line;
  std::size_t line_no = 0;

  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (!line.empty() && line.back() == '\r') line.pop_back();

    std::vector<double> fields;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      const std::size_t comma = line.find(',', pos);
      const std::string_view cell(line.data() + pos,
                                  (comma == std::string::npos ? line.size() : comma) - pos);
      double value = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
      if (ec != std::errc() || ptr != cell.data() + cell.size()) {
        throw ParseError("load_csv_dataset: non-numeric field '" + std::string(cell) + "'",
                         line_no);
      }
      fields.push_back(value);
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    if (fields.size() < 2) {
      throw ParseError("load_csv_dataset: row needs a label and at least one feature",
                       line_no);
    }

    const double label_raw = fields[0];
    const int label = static_cast<int>(label_raw);
    if (static_cast<double>(label) != label_raw || label < 0 ||
        static_cast<std::size_t>(label) >= class_count) {
      throw ParseError("load_csv_dataset: label " + std::to_string(label_raw) +
                       " invalid for class count " + std::to_string(class_count),
                       line_no);
    }
    if (rows.empty()) {
      dim = fields.size() - 1;
    } else if (fields.size() - 1 != dim) {
      throw ParseError("load_csv_dataset: ragged row (expected " + std::to_string(dim) +
                       " features, got " + std::to_string(fields.size() - 1) + ")",
                       line_no);
    }
    labels.push_back(label);
    rows.emplace_back(fields.begin() + 1, fields.end());
  }

  LabeledDataset out;
  out.features = Tensor2D(rows.size(), dim);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < dim; ++c) out.features.at(r, c) = rows[r][c];
  }
  out.labels = std::move(labels);
  out.class_count = class_count;
  out.name = path.stem().string();
  return out;
}

void save_csv_dataset(const std::filesystem::path& path, const LabeledDataset& data) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("save_csv_dataset: cannot open " + path.string());
  std::ostringstream buf;
  buf.precision(17);
  for (std::size_t r = 0; r < data.size(); ++r) {
    buf << data.labels[r];
    for (std::size_t c = 0; c < data.dim(); ++c) buf << ',' << data.features.at(r, c);
    buf << '\n';
  }
  os << buf.str();
}

}  // namespace uforge::data
