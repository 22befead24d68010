#include "microt/data.hpp"

#include "microt/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace microt {

namespace {

struct Blob {
  double cx, cy, sigma, amp;
};

/// Smooth class template on [0,1]^2: a sum of signed gaussians, rescaled to
/// zero mean so that plain average intensity carries no class signal.
std::vector<double> class_template(int image, int blobs, Rng& rng) {
  std::vector<Blob> parts;
  for (int b = 0; b < blobs; ++b) {
    Blob blob{};
    blob.cx = rng.uniform(0.2, 0.8);
    blob.cy = rng.uniform(0.2, 0.8);
    blob.sigma = rng.uniform(0.10, 0.22);
    blob.amp = rng.uniform(0.6, 1.0) * (rng.bernoulli(0.5) ? 1.0 : -1.0);
    parts.push_back(blob);
  }
  std::vector<double> img(static_cast<std::size_t>(image) * image, 0.0);
  for (int y = 0; y < image; ++y) {
    for (int x = 0; x < image; ++x) {
      const double fx = (x + 0.5) / image;
      const double fy = (y + 0.5) / image;
      double v = 0;
      for (const Blob& b : parts) {
        const double dx = fx - b.cx;
        const double dy = fy - b.cy;
        v += b.amp * std::exp(-(dx * dx + dy * dy) / (2.0 * b.sigma * b.sigma));
      }
      img[static_cast<std::size_t>(y) * image + x] = v;
    }
  }
  const double mean = std::accumulate(img.begin(), img.end(), 0.0) / img.size();
  double peak = 1e-9;
  for (double& v : img) {
    v -= mean;
    peak = std::max(peak, std::abs(v));
  }
  for (double& v : img) v /= peak;  // in [-1, 1], zero mean
  return img;
}

}  // namespace

Dataset make_synthetic(const SyntheticSpec& spec, std::uint64_t sample_seed) {
  if (spec.classes < 2) throw std::invalid_argument("synthetic data needs >= 2 classes");
  Rng template_rng(derive_seed(spec.template_seed, "templates"));
  std::vector<std::vector<double>> templates;
  for (int c = 0; c < spec.classes; ++c)
    templates.push_back(class_template(spec.image, spec.blobs_per_class, template_rng));

  Dataset ds;
  ds.classes = spec.classes;
  ds.sample_shape = {1, spec.image, spec.image};
  Rng rng(derive_seed(sample_seed, "samples"));
  const int n = spec.image;
  for (int c = 0; c < spec.classes; ++c) {
    for (int s = 0; s < spec.samples_per_class; ++s) {
      const int dx = static_cast<int>(rng.below(2 * spec.max_shift + 1)) - spec.max_shift;
      const int dy = static_cast<int>(rng.below(2 * spec.max_shift + 1)) - spec.max_shift;
      const double contrast = rng.uniform(spec.contrast_lo, spec.contrast_hi);
      Tensor img({1, n, n});
      for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
          const int sy = y - dy;
          const int sx = x - dx;
          double v = 0.0;
          if (sy >= 0 && sy < n && sx >= 0 && sx < n)
            v = templates[c][static_cast<std::size_t>(sy) * n + sx];
          v = 0.5 + 0.5 * contrast * v + spec.noise * rng.normal();
          img.data[static_cast<Eigen::Index>(y) * n + x] = std::clamp(v, 0.0, 1.0);
        }
      }
      ds.inputs.push_back(std::move(img));
      ds.labels.push_back(c);
    }
  }
  return ds;
}

DatasetHandle split_dataset(Dataset all, const SplitRatios& ratios, std::uint64_t seed,
                            std::string preprocessing) {
  if (all.inputs.size() != all.labels.size())
    throw std::invalid_argument("label/sample count mismatch: " +
                                std::to_string(all.labels.size()) + " labels for " +
                                std::to_string(all.inputs.size()) + " samples");
  const double total = ratios.train + ratios.val + ratios.test;
  if (total <= 0) throw std::invalid_argument("split ratios must be positive");

  const std::size_t n = all.inputs.size();
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, "split"));
  rng.shuffle(order);

  const std::size_t n_train = static_cast<std::size_t>(std::floor(n * ratios.train / total));
  const std::size_t n_val = static_cast<std::size_t>(std::floor(n * ratios.val / total));

  DatasetHandle h;
  h.classes = all.classes;
  h.sample_shape = all.sample_shape;
  h.preprocessing = std::move(preprocessing);
  auto fill = [&](Dataset& out, std::size_t from, std::size_t to) {
    out.classes = all.classes;
    out.sample_shape = all.sample_shape;
    for (std::size_t i = from; i < to; ++i) {
      out.inputs.push_back(all.inputs[static_cast<std::size_t>(order[i])]);
      out.labels.push_back(all.labels[static_cast<std::size_t>(order[i])]);
    }
  };
  fill(h.train, 0, n_train);
  fill(h.val, n_train, n_train + n_val);
  fill(h.test, n_train + n_val, n);
  return h;
}

// --- IDX -----------------------------------------------------------------

namespace {

std::uint32_t read_be32(std::istream& in, const std::string& what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw std::runtime_error("truncated IDX file while reading " + what);
  return (static_cast<std::uint32_t>(b[0]) << 24) | (static_cast<std::uint32_t>(b[1]) << 16) |
         (static_cast<std::uint32_t>(b[2]) << 8) | b[3];
}

}  // namespace

DatasetHandle ingest_idx(const std::string& images_path, const std::string& labels_path,
                         const SplitRatios& ratios, std::uint64_t seed) {
  std::ifstream imgs(images_path, std::ios::binary);
  if (!imgs) throw std::runtime_error("cannot open IDX image file: " + images_path);
  std::ifstream labs(labels_path, std::ios::binary);
  if (!labs) throw std::runtime_error("cannot open IDX label file: " + labels_path);

  if (read_be32(imgs, "image magic") != 0x00000803u)
    throw std::runtime_error("malformed IDX image magic in " + images_path);
  const std::uint32_t n = read_be32(imgs, "image count");
  const std::uint32_t rows = read_be32(imgs, "rows");
  const std::uint32_t cols = read_be32(imgs, "cols");

  if (read_be32(labs, "label magic") != 0x00000801u)
    throw std::runtime_error("malformed IDX label magic in " + labels_path);
  const std::uint32_t nl = read_be32(labs, "label count");
  if (n != nl)
    throw std::runtime_error("label/sample count mismatch: " + std::to_string(nl) +
                             " labels for " + std::to_string(n) + " images");

  Dataset all;
  all.sample_shape = {1, static_cast<int>(rows), static_cast<int>(cols)};
  std::vector<unsigned char> buf(static_cast<std::size_t>(rows) * cols);
  int max_label = 0;
  for (std::uint32_t i = 0; i < n; ++i) {
    if (!imgs.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size())))
      throw std::runtime_error("truncated IDX image payload in " + images_path);
    Tensor t(all.sample_shape);
    for (std::size_t p = 0; p < buf.size(); ++p)
      t.data[static_cast<Eigen::Index>(p)] = buf[p] / 255.0;
    all.inputs.push_back(std::move(t));
    char lb;
    if (!labs.read(&lb, 1))
      throw std::runtime_error("truncated IDX label payload in " + labels_path);
    const int label = static_cast<unsigned char>(lb);
    all.labels.push_back(label);
    max_label = std::max(max_label, label);
  }
  all.classes = max_label + 1;
  return split_dataset(std::move(all), ratios, seed, "idx: scale=1/255");
}

// --- CSV ------------------------------------------------------------------

DatasetHandle ingest_csv(const std::string& path, const SplitRatios& ratios, std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open CSV file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty CSV file: " + path);

  auto split_row = [](const std::string& row) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream is(row);
    while (std::getline(is, cell, ',')) cells.push_back(cell);
    return cells;
  };
  const std::size_t columns = split_row(line).size();
  if (columns < 2) throw std::runtime_error("CSV needs at least one feature and a label column");
  const std::size_t dim = columns - 1;

  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  int max_label = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto cells = split_row(line);
    if (cells.size() != columns)
      throw std::runtime_error("CSV row with " + std::to_string(cells.size()) +
                               " cells, expected " + std::to_string(columns));
    std::vector<double> feat(dim);
    for (std::size_t i = 0; i < dim; ++i) feat[i] = std::stod(cells[i]);
    rows.push_back(std::move(feat));
    const int label = std::stoi(cells[dim]);
    if (label < 0) throw std::runtime_error("negative label in CSV");
    labels.push_back(label);
    max_label = std::max(max_label, label);
  }
  if (rows.empty()) throw std::runtime_error("CSV has a header but no data rows: " + path);

  // Per-column min-max to [0,1]; constant columns map to 0.
  std::vector<double> lo(dim, 1e300), hi(dim, -1e300);
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < dim; ++i) {
      lo[i] = std::min(lo[i], r[i]);
      hi[i] = std::max(hi[i], r[i]);
    }
  }
  Dataset all;
  all.sample_shape = {static_cast<int>(dim)};
  all.classes = max_label + 1;
  for (const auto& r : rows) {
    Tensor t(all.sample_shape);
    for (std::size_t i = 0; i < dim; ++i) {
      const double span = hi[i] - lo[i];
      t.data[static_cast<Eigen::Index>(i)] = span > 0 ? (r[i] - lo[i]) / span : 0.0;
    }
    all.inputs.push_back(std::move(t));
  }
  all.labels = std::move(labels);
  return split_dataset(std::move(all), ratios, seed, "csv: per-column min-max");
}

Dataset concat(const Dataset& a, const Dataset& b) {
  if (!a.inputs.empty() && !b.inputs.empty() && !same_shape(a.sample_shape, b.sample_shape))
    throw ShapeError("concat of datasets with different sample shapes");
  Dataset out = a;
  out.classes = std::max(a.classes, b.classes);
  out.inputs.insert(out.inputs.end(), b.inputs.begin(), b.inputs.end());
  out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
  return out;
}

Dataset take(const Dataset& d, const std::vector<int>& indices) {
  Dataset out;
  out.classes = d.classes;
  out.sample_shape = d.sample_shape;
  for (int i : indices) {
    out.inputs.push_back(d.inputs.at(static_cast<std::size_t>(i)));
    out.labels.push_back(d.labels.at(static_cast<std::size_t>(i)));
  }
  return out;
}

}  // namespace microt
