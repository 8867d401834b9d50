#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gancircle/image.hpp"
#include "gancircle/models.hpp"
#include "gancircle/resample.hpp"
#include "gancircle/tensor.hpp"

namespace gancircle {

// Procedural realization of the degradation model: noise at HR scale, then a
// x2 resolution drop (area averaging unless antialias is off).
struct DegradationSpec {
  enum class NoiseKind { gaussian, poisson_like };

  int factor = 2;  // only x2 is supported
  double noise_sigma = 0.01;
  NoiseKind noise_kind = NoiseKind::gaussian;
  bool antialias = true;
  bool noise_after_downsample = false;  // default mirrors the published order
  std::uint64_t seed = 0;

  void validate() const;
};

DegradationSpec::NoiseKind parse_noise_kind(const std::string& s);
std::string noise_kind_name(DegradationSpec::NoiseKind k);

// hr dimensions must be even; output is clamped back to [0,1] and is a pure
// function of (hr, spec).
ImageSlice simulate_lr(const ImageSlice& hr, const DegradationSpec& spec);

Array2D upsample_to_match(const Array2D& lr, ResampleMethod method);

// ----------------------------------------------------------------- manifest

struct ManifestEntry {
  std::string path;  // relative to the manifest file
  char domain = 'Y';
  std::optional<std::string> pairing_id;
};

// Line-oriented: "#version 1" header, optional further '#' comment lines,
// then one "<path>\t<X|Y>\t<pairing_id|->" entry per line.
struct DatasetManifest {
  std::vector<std::string> comments;  // without '#', excludes the version line
  std::vector<ManifestEntry> entries;

  void validate() const;  // duplicate pairing id within a domain is an error
  static DatasetManifest read(const std::string& path);
  void write(const std::string& path) const;
};

// Loads every entry in manifest order; paths resolve against the manifest
// directory. min_rows/min_cols reject slices too small to crop from.
std::vector<ImageSlice> load_slices(const std::string& manifest_path, std::int64_t min_rows = 0,
                                    std::int64_t min_cols = 0);

// ------------------------------------------------------------------ patches

struct PatchGeometry {
  std::int64_t hr = 64;
  std::int64_t lr = 32;
  bool same_size() const { return hr == lr; }
};

// supervised/semi train on native-LR pairs (64/32); the unsupervised
// geometry is same-size (64/64) with x pre-upsampled to match.
PatchGeometry geometry_for_mode(Mode mode);

struct PatchPair {
  Array2D lr;
  std::optional<Array2D> hr;
  std::pair<std::int64_t, std::int64_t> center{0, 0};  // in HR coordinates
  bool paired = false;
};

// Draws `count` patch pairs with centers uniform over the valid area; paired
// patches share their physical center. lr must be the hr slice's degraded
// (half-size) or size-matched counterpart depending on geometry.
std::vector<PatchPair> extract_patches(const ImageSlice& hr, const ImageSlice& lr,
                                       PatchGeometry geom, int count, std::uint64_t seed);

// Unpaired singletons from one slice.
std::vector<Array2D> extract_singles(const ImageSlice& slice, std::int64_t patch, int count,
                                     std::uint64_t seed);

// Keeps floor(fraction*n) pairs associated; the rest are disassociated into
// the X and Y pools with the pairing dropped. Deterministic under seed.
void split_semi(const std::vector<PatchPair>& pairs, double paired_fraction, std::uint64_t seed,
                std::vector<PatchPair>& paired_out, std::vector<Array2D>& x_pool,
                std::vector<Array2D>& y_pool);

// ------------------------------------------------------------------ batches

struct Batch {
  bool paired = false;
  Tensor x;  // (N,1,h,w)
  Tensor y;  // (N,1,H,W)
};

// One epoch of batches. Supervised: shuffled paired batches. Unsupervised:
// independent draws from the two pools. Semi: paired and unpaired batches
// strictly alternating (paired first); the paired sub-stream uses the same
// shuffle derivation as the supervised mode, so a fully paired semi run
// degenerates to the supervised stream bit for bit.
std::vector<Batch> make_batches(const std::vector<PatchPair>& paired,
                                const std::vector<Array2D>& x_pool,
                                const std::vector<Array2D>& y_pool, int batch_size, Mode mode,
                                std::uint64_t seed, std::int64_t epoch);

Tensor stack_patches(const std::vector<const Array2D*>& patches);

// ----------------------------------------------------------------- assembly

struct TrainingData {
  std::vector<PatchPair> paired;
  std::vector<Array2D> x_pool, y_pool;
};

struct AssemblyParams {
  int patches_per_slice = 8;
  ResampleMethod upsample_method = ResampleMethod::nearest;  // same-size x construction
  double paired_fraction = 1.0;
  std::uint64_t seed = 0;
};

// Manifest -> patches -> (paired, pools) for the given mode. Supervised keeps
// every pair; semi splits by paired_fraction; unsupervised disassociates all
// pairs and pre-upsamples the X domain so both pools are 64x64.
TrainingData assemble_training_data(const std::string& manifest_path, Mode mode,
                                    const AssemblyParams& params);

}  // namespace gancircle
