#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dusk/cp.hpp"
#include "dusk/kernels.hpp"
#include "dusk/svm.hpp"
#include "dusk/tensor.hpp"

namespace dusk {

// Binary classification dataset: same-shaped instances with +-1 labels.
// content_hash is an FNV-1a 64 digest of the canonical binary (DTEN) bytes.
struct TensorDataset {
  std::vector<std::size_t> shape;
  std::vector<DenseTensor> instances;
  std::vector<int> labels;
  std::string name;
  std::uint64_t content_hash = 0;

  std::size_t size() const { return instances.size(); }
};

TensorDataset make_dataset(std::vector<DenseTensor> instances,
                           std::vector<int> labels, std::string name);

std::uint64_t dataset_content_hash(const TensorDataset& ds);

// DTEN binary format: "DTEN", u16 version, u32 N, u32 dims[N], u32 M, then
// per instance one i8 label and numel f64 values, all little-endian,
// row-major. Canonical for hashing.
void save_dataset(const TensorDataset& ds, const std::filesystem::path& path);
TensorDataset load_dataset(const std::filesystem::path& path);

// Line-oriented text format for hand-written fixtures:
//   dten/1 N=3 dims=2x3x4 M=2
//   +1 v v v ...
//   -1 v v v ...
void save_dataset_text(const TensorDataset& ds,
                       const std::filesystem::path& path);
TensorDataset load_dataset_text(const std::filesystem::path& path);

// Elementwise (x - min) / (max - min); a constant tensor maps to all zeros.
DenseTensor rescale_unit(const DenseTensor& x);
TensorDataset rescale_dataset(const TensorDataset& ds);

// Synthetic low-rank generator: each class has its own ground-truth factor
// set; instances are the class signal plus Gaussian noise whose standard
// deviation is noise_sigma * ||signal||_F / sqrt(numel), so noise_sigma is
// a relative (dimensionless) level.
struct SynthResult {
  TensorDataset dataset;
  CpModel positive_signal;
  CpModel negative_signal;
};

SynthResult synth_lowrank(std::vector<std::size_t> shape,
                          std::size_t rank_signal, std::size_t m_per_class,
                          double noise_sigma, std::uint64_t seed);

struct CpCache {
  std::uint64_t dataset_hash = 0;
  std::size_t rank = 0;
  std::uint64_t opts_digest = 0;
  std::vector<CpModel> models;
};

std::uint64_t cp_opts_digest(const CpOptions& opts);

// "DCPC" envelope around the per-instance factor matrices.
void save_cp_cache(const CpCache& cache, const std::filesystem::path& path);
CpCache load_cp_cache(const std::filesystem::path& path);

// Returns a cache valid for (dataset, rank, opts): loads `path` when its key
// matches, otherwise factorizes, stores, and returns the fresh cache. A
// corrupt file is discarded with a warning on stderr.
CpCache cache_load_or_compute(const TensorDataset& ds, std::size_t rank,
                              const CpOptions& opts,
                              const std::filesystem::path& path);

// "DSVM" / "DGRM" envelopes.
void save_svm_model(const SvmModel& model, const std::filesystem::path& path);
SvmModel load_svm_model(const std::filesystem::path& path);
void save_gram(const GramMatrix& gram, const std::filesystem::path& path);
GramMatrix load_gram(const std::filesystem::path& path);

// Write-to-temp-then-rename; partial writes never clobber `path`.
void atomic_write(const std::filesystem::path& path,
                  const std::vector<std::uint8_t>& bytes);

std::uint64_t fnv1a64(const std::vector<std::uint8_t>& bytes);

}  // namespace dusk
