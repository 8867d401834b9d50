#include "gancircle/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "gancircle/rng.hpp"

namespace fs = std::filesystem;

namespace gancircle {

void DegradationSpec::validate() const {
  if (factor != 2) throw std::invalid_argument("DegradationSpec: factor must be 2");
  if (noise_sigma < 0) throw std::invalid_argument("DegradationSpec: noise_sigma must be >= 0");
}

DegradationSpec::NoiseKind parse_noise_kind(const std::string& s) {
  if (s == "gaussian") return DegradationSpec::NoiseKind::gaussian;
  if (s == "poisson-like") return DegradationSpec::NoiseKind::poisson_like;
  throw std::invalid_argument("unknown noise kind: " + s);
}

std::string noise_kind_name(DegradationSpec::NoiseKind k) {
  return k == DegradationSpec::NoiseKind::gaussian ? "gaussian" : "poisson-like";
}

static void add_noise(Array2D& img, const DegradationSpec& spec, Rng& rng) {
  if (spec.noise_sigma == 0.0) return;
  if (spec.noise_kind == DegradationSpec::NoiseKind::gaussian) {
    for (double& x : img.v) x += rng.gaussian(0.0, spec.noise_sigma);
  } else {
    // dose-like: variance proportional to intensity
    for (double& x : img.v) x += rng.gaussian(0.0, spec.noise_sigma * std::sqrt(std::max(x, 0.0)));
  }
}

ImageSlice simulate_lr(const ImageSlice& hr, const DegradationSpec& spec) {
  spec.validate();
  if (hr.pixels.rows % 2 || hr.pixels.cols % 2)
    throw std::invalid_argument("simulate_lr: slice '" + hr.slice_id + "' has odd dimensions " +
                                std::to_string(hr.pixels.rows) + "x" +
                                std::to_string(hr.pixels.cols));
  Rng rng(spec.seed);
  Array2D work = hr.pixels;
  if (!spec.noise_after_downsample) add_noise(work, spec, rng);
  Array2D down = spec.antialias ? downsample2x_mean(work) : downsample2x_decimate(work);
  if (spec.noise_after_downsample) add_noise(down, spec, rng);
  for (double& x : down.v) x = std::clamp(x, 0.0, 1.0);

  ImageSlice out;
  out.pixels = std::move(down);
  out.hu_window = hr.hu_window;
  out.spacing = {hr.spacing.first * 2, hr.spacing.second * 2};
  out.slice_id = hr.slice_id + "_lr";
  out.domain = 'X';
  out.pairing_id = hr.pairing_id ? hr.pairing_id : std::optional<std::string>(hr.slice_id);
  return out;
}

Array2D upsample_to_match(const Array2D& lr, ResampleMethod method) {
  return upsample2x(lr, method);
}

// ------------------------------------------------------------------ manifest

void DatasetManifest::validate() const {
  std::set<std::pair<char, std::string>> seen;
  for (const auto& e : entries) {
    if (e.domain != 'X' && e.domain != 'Y')
      throw std::invalid_argument("manifest: bad domain tag for " + e.path);
    if (e.pairing_id) {
      if (!seen.insert({e.domain, *e.pairing_id}).second)
        throw std::invalid_argument("manifest: duplicate pairing id '" + *e.pairing_id +
                                    "' in domain " + std::string(1, e.domain));
    }
  }
}

DatasetManifest DatasetManifest::read(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open manifest: " + path);
  std::string line;
  if (!std::getline(f, line) || line != "#version 1")
    throw std::runtime_error("manifest must start with '#version 1': " + path);
  DatasetManifest m;
  size_t lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '#') {
      m.comments.push_back(line.substr(1));
      continue;
    }
    std::istringstream is(line);
    std::string p, dom, pid;
    if (!std::getline(is, p, '\t') || !std::getline(is, dom, '\t') || !std::getline(is, pid) ||
        dom.size() != 1)
      throw std::runtime_error("malformed manifest line " + std::to_string(lineno) + " in " + path);
    ManifestEntry e;
    e.path = p;
    e.domain = dom[0];
    if (pid != "-") e.pairing_id = pid;
    m.entries.push_back(std::move(e));
  }
  m.validate();
  return m;
}

void DatasetManifest::write(const std::string& path) const {
  validate();
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write manifest: " + path);
  f << "#version 1\n";
  for (const auto& c : comments) f << "#" << c << "\n";
  for (const auto& e : entries)
    f << e.path << "\t" << e.domain << "\t" << (e.pairing_id ? *e.pairing_id : "-") << "\n";
  if (!f) throw std::runtime_error("short write: " + path);
}

std::vector<ImageSlice> load_slices(const std::string& manifest_path, std::int64_t min_rows,
                                    std::int64_t min_cols) {
  DatasetManifest m = DatasetManifest::read(manifest_path);
  fs::path base = fs::path(manifest_path).parent_path();
  std::vector<ImageSlice> out;
  out.reserve(m.entries.size());
  for (const auto& e : m.entries) {
    fs::path p = fs::path(e.path).is_absolute() ? fs::path(e.path) : base / e.path;
    if (!fs::exists(p)) throw std::runtime_error("manifest entry missing on disk: " + p.string());
    ImageSlice s;
    s.pixels = read_image_u16(p.string());
    if (s.pixels.rows < min_rows || s.pixels.cols < min_cols)
      throw std::runtime_error("slice " + p.string() + " is " + std::to_string(s.pixels.rows) +
                               "x" + std::to_string(s.pixels.cols) + ", below the minimum " +
                               std::to_string(min_rows) + "x" + std::to_string(min_cols));
    s.slice_id = fs::path(e.path).stem().string();
    s.domain = e.domain;
    s.pairing_id = e.pairing_id;
    out.push_back(std::move(s));
  }
  return out;
}

// ------------------------------------------------------------------ patches

PatchGeometry geometry_for_mode(Mode mode) {
  if (mode == Mode::unsupervised) return {64, 64};
  return {64, 32};
}

static Array2D crop(const Array2D& img, std::int64_t r0, std::int64_t c0, std::int64_t size) {
  Array2D out(size, size);
  for (std::int64_t r = 0; r < size; ++r)
    for (std::int64_t c = 0; c < size; ++c) out.at(r, c) = img.at(r0 + r, c0 + c);
  return out;
}

std::vector<PatchPair> extract_patches(const ImageSlice& hr, const ImageSlice& lr,
                                       PatchGeometry geom, int count, std::uint64_t seed) {
  const Array2D& h = hr.pixels;
  const Array2D& l = lr.pixels;
  if (h.rows < geom.hr || h.cols < geom.hr)
    throw std::invalid_argument("extract_patches: HR slice " + hr.slice_id + " smaller than " +
                                std::to_string(geom.hr) + " patch");
  if (geom.same_size()) {
    if (!h.same_shape(l))
      throw std::invalid_argument("extract_patches: same-size geometry needs equal shapes");
  } else {
    if (l.rows != h.rows / 2 || l.cols != h.cols / 2)
      throw std::invalid_argument("extract_patches: LR slice must be half the HR size");
  }

  Rng rng(seed);
  std::vector<PatchPair> out;
  out.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) {
    PatchPair p;
    p.paired = true;
    if (geom.same_size()) {
      std::int64_t r0 = static_cast<std::int64_t>(rng.below(h.rows - geom.hr + 1));
      std::int64_t c0 = static_cast<std::int64_t>(rng.below(h.cols - geom.hr + 1));
      p.hr = crop(h, r0, c0, geom.hr);
      p.lr = crop(l, r0, c0, geom.lr);
      p.center = {r0 + geom.hr / 2, c0 + geom.hr / 2};
    } else {
      // even HR corner so the LR crop lands on whole pixels of the same center
      std::int64_t r0 = 2 * static_cast<std::int64_t>(rng.below((h.rows - geom.hr) / 2 + 1));
      std::int64_t c0 = 2 * static_cast<std::int64_t>(rng.below((h.cols - geom.hr) / 2 + 1));
      p.hr = crop(h, r0, c0, geom.hr);
      p.lr = crop(l, r0 / 2, c0 / 2, geom.lr);
      p.center = {r0 + geom.hr / 2, c0 + geom.hr / 2};
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<Array2D> extract_singles(const ImageSlice& slice, std::int64_t patch, int count,
                                     std::uint64_t seed) {
  const Array2D& img = slice.pixels;
  if (img.rows < patch || img.cols < patch)
    throw std::invalid_argument("extract_singles: slice " + slice.slice_id + " smaller than " +
                                std::to_string(patch) + " patch");
  Rng rng(seed);
  std::vector<Array2D> out;
  for (int i = 0; i < count; ++i) {
    std::int64_t r0 = static_cast<std::int64_t>(rng.below(img.rows - patch + 1));
    std::int64_t c0 = static_cast<std::int64_t>(rng.below(img.cols - patch + 1));
    out.push_back(crop(img, r0, c0, patch));
  }
  return out;
}

void split_semi(const std::vector<PatchPair>& pairs, double paired_fraction, std::uint64_t seed,
                std::vector<PatchPair>& paired_out, std::vector<Array2D>& x_pool,
                std::vector<Array2D>& y_pool) {
  if (!(paired_fraction >= 0.0 && paired_fraction <= 1.0))
    throw std::invalid_argument("split_semi: paired_fraction must be in [0,1]");
  std::vector<size_t> idx(pairs.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng rng(mix_seed(seed, fnv1a64("split_semi")));
  rng.shuffle(idx);
  size_t keep = static_cast<size_t>(std::floor(paired_fraction * static_cast<double>(pairs.size())));
  for (size_t i = 0; i < idx.size(); ++i) {
    const PatchPair& p = pairs[idx[i]];
    if (i < keep) {
      paired_out.push_back(p);
    } else {
      if (!p.hr) throw std::invalid_argument("split_semi: unpaired input patch");
      x_pool.push_back(p.lr);
      y_pool.push_back(*p.hr);
    }
  }
}

// ------------------------------------------------------------------ batches

Tensor stack_patches(const std::vector<const Array2D*>& patches) {
  if (patches.empty()) throw std::invalid_argument("stack_patches: empty batch");
  std::int64_t h = patches[0]->rows, w = patches[0]->cols;
  Tensor t(Shape(static_cast<std::int64_t>(patches.size()), 1, h, w));
  for (size_t n = 0; n < patches.size(); ++n) {
    if (patches[n]->rows != h || patches[n]->cols != w)
      throw std::invalid_argument("stack_patches: ragged patch sizes");
    std::copy(patches[n]->v.begin(), patches[n]->v.end(),
              t.v.begin() + static_cast<std::ptrdiff_t>(n * h * w));
  }
  return t;
}

namespace {

// endless deterministic index stream over a pool, reshuffled on each wrap
struct IndexStream {
  std::vector<size_t> order;
  size_t pos = 0;
  Rng rng;

  IndexStream(size_t n, std::uint64_t seed) : rng(seed) {
    order.resize(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(order);
  }
  size_t next() {
    if (pos == order.size()) {
      rng.shuffle(order);
      pos = 0;
    }
    return order[pos++];
  }
};

Batch paired_batch(const std::vector<PatchPair>& paired, const std::vector<size_t>& ids) {
  std::vector<const Array2D*> xs, ys;
  for (size_t i : ids) {
    xs.push_back(&paired[i].lr);
    ys.push_back(&*paired[i].hr);
  }
  Batch b;
  b.paired = true;
  b.x = stack_patches(xs);
  b.y = stack_patches(ys);
  return b;
}

Batch unpaired_batch(const std::vector<Array2D>& x_pool, const std::vector<Array2D>& y_pool,
                     IndexStream& xs, IndexStream& ys, int batch_size) {
  std::vector<const Array2D*> xb, yb;
  for (int i = 0; i < batch_size; ++i) {
    xb.push_back(&x_pool[xs.next()]);
    yb.push_back(&y_pool[ys.next()]);
  }
  Batch b;
  b.paired = false;
  b.x = stack_patches(xb);
  b.y = stack_patches(yb);
  return b;
}

}  // namespace

std::vector<Batch> make_batches(const std::vector<PatchPair>& paired,
                                const std::vector<Array2D>& x_pool,
                                const std::vector<Array2D>& y_pool, int batch_size, Mode mode,
                                std::uint64_t seed, std::int64_t epoch) {
  if (batch_size <= 0) throw std::invalid_argument("make_batches: batch_size must be positive");
  std::vector<Batch> out;

  auto paired_chunks = [&]() {
    if (paired.empty()) throw std::invalid_argument("make_batches: empty paired pool");
    std::vector<size_t> idx(paired.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    Rng rng(mix_seed(seed, fnv1a64("paired"), static_cast<std::uint64_t>(epoch)));
    rng.shuffle(idx);
    std::vector<std::vector<size_t>> chunks;
    for (size_t i = 0; i < idx.size(); i += static_cast<size_t>(batch_size)) {
      size_t end = std::min(idx.size(), i + static_cast<size_t>(batch_size));
      chunks.emplace_back(idx.begin() + static_cast<std::ptrdiff_t>(i),
                          idx.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return chunks;
  };

  switch (mode) {
    case Mode::supervised: {
      for (const auto& c : paired_chunks()) out.push_back(paired_batch(paired, c));
      break;
    }  // NOLINT
    case Mode::unsupervised: {
      if (x_pool.empty() || y_pool.empty())
        throw std::invalid_argument("make_batches: unsupervised needs both domain pools");
      IndexStream xs(x_pool.size(),
                     mix_seed(seed, fnv1a64("pool_x"), static_cast<std::uint64_t>(epoch)));
      IndexStream ys(y_pool.size(),
                     mix_seed(seed, fnv1a64("pool_y"), static_cast<std::uint64_t>(epoch)));
      size_t n = std::max(x_pool.size(), y_pool.size());
      size_t steps = (n + static_cast<size_t>(batch_size) - 1) / static_cast<size_t>(batch_size);
      for (size_t i = 0; i < steps; ++i)
        out.push_back(unpaired_batch(x_pool, y_pool, xs, ys, batch_size));
      break;
    }
    case Mode::semi: {
      bool have_unpaired = !x_pool.empty() && !y_pool.empty();
      IndexStream xs(std::max<size_t>(x_pool.size(), 1),
                     mix_seed(seed, fnv1a64("pool_x"), static_cast<std::uint64_t>(epoch)));
      IndexStream ys(std::max<size_t>(y_pool.size(), 1),
                     mix_seed(seed, fnv1a64("pool_y"), static_cast<std::uint64_t>(epoch)));
      for (const auto& c : paired_chunks()) {
        out.push_back(paired_batch(paired, c));
        if (have_unpaired) out.push_back(unpaired_batch(x_pool, y_pool, xs, ys, batch_size));
      }
      break;
    }
  }
  return out;
}

}  // namespace gancircle
