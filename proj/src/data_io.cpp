#include "dusk/data_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

static_assert(std::endian::native == std::endian::little,
              "serialization assumes a little-endian host");

namespace dusk {

namespace {

struct ByteWriter {
  std::vector<std::uint8_t> buf;

  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    buf.insert(buf.end(), b, b + n);
  }
  void u8(std::uint8_t v) { raw(&v, 1); }
  void i8(std::int8_t v) { raw(&v, 1); }
  void u16(std::uint16_t v) { raw(&v, 2); }
  void u32(std::uint32_t v) { raw(&v, 4); }
  void u64(std::uint64_t v) { raw(&v, 8); }
  void f64(double v) { raw(&v, 8); }
};

struct ByteReader {
  const std::vector<std::uint8_t>& buf;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > buf.size())
      throw TruncationError("truncated: expected at least " +
                                std::to_string(pos + n) + " bytes, file has " +
                                std::to_string(buf.size()),
                            pos);
  }
  void raw(void* p, std::size_t n) {
    need(n);
    std::memcpy(p, buf.data() + pos, n);
    pos += n;
  }
  std::uint8_t u8() { std::uint8_t v; raw(&v, 1); return v; }
  std::int8_t i8() { std::int8_t v; raw(&v, 1); return v; }
  std::uint16_t u16() { std::uint16_t v; raw(&v, 2); return v; }
  std::uint32_t u32() { std::uint32_t v; raw(&v, 4); return v; }
  std::uint64_t u64() { std::uint64_t v; raw(&v, 8); return v; }
  double f64() { double v; raw(&v, 8); return v; }
};

void expect_magic(ByteReader& r, const char magic[4]) {
  char got[4];
  const std::size_t at = r.pos;
  r.raw(got, 4);
  if (std::memcmp(got, magic, 4) != 0)
    throw MagicError(std::string("bad magic, expected \"") +
                         std::string(magic, 4) + "\"",
                     at);
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return bytes;
}

std::vector<std::uint8_t> serialize_dataset(const TensorDataset& ds) {
  ByteWriter w;
  w.raw("DTEN", 4);
  w.u16(1);
  w.u32(static_cast<std::uint32_t>(ds.shape.size()));
  for (std::size_t d : ds.shape) w.u32(static_cast<std::uint32_t>(d));
  w.u32(static_cast<std::uint32_t>(ds.size()));
  for (std::size_t i = 0; i < ds.size(); ++i) {
    w.i8(static_cast<std::int8_t>(ds.labels[i]));
    for (double v : ds.instances[i].values()) w.f64(v);
  }
  return std::move(w.buf);
}

void write_factor_matrices(ByteWriter& w, const CpModel& m) {
  for (std::size_t mode = 0; mode < m.order(); ++mode) {
    const auto& f = m.factor(mode);
    for (Eigen::Index i = 0; i < f.rows(); ++i)
      for (Eigen::Index r = 0; r < f.cols(); ++r) w.f64(f(i, r));
  }
}

CpModel read_cp_model(ByteReader& r, const std::vector<std::size_t>& shape,
                      std::size_t rank) {
  std::vector<Eigen::MatrixXd> factors(shape.size());
  for (std::size_t mode = 0; mode < shape.size(); ++mode) {
    factors[mode].resize(static_cast<Eigen::Index>(shape[mode]),
                         static_cast<Eigen::Index>(rank));
    for (Eigen::Index i = 0; i < factors[mode].rows(); ++i)
      for (Eigen::Index rr = 0; rr < factors[mode].cols(); ++rr) {
        const std::size_t at = r.pos;
        const double v = r.f64();
        if (!std::isfinite(v))
          throw ValueError("non-finite factor entry", at);
        factors[mode](i, rr) = v;
      }
  }
  return CpModel(shape, std::move(factors));
}

}  // namespace

std::uint64_t fnv1a64(const std::vector<std::uint8_t>& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

TensorDataset make_dataset(std::vector<DenseTensor> instances,
                           std::vector<int> labels, std::string name) {
  if (instances.empty() || labels.empty())
    throw ArgumentError("dataset needs non-empty instances and labels");
  if (instances.size() != labels.size())
    throw ShapeError("label count does not match instance count");
  for (const auto& t : instances)
    if (t.shape() != instances[0].shape())
      throw ShapeError("dataset instances must share one shape");
  for (int y : labels)
    if (y != 1 && y != -1) throw ArgumentError("labels must be -1 or +1");
  TensorDataset ds;
  ds.shape = instances[0].shape();
  ds.instances = std::move(instances);
  ds.labels = std::move(labels);
  ds.name = std::move(name);
  ds.content_hash = dataset_content_hash(ds);
  return ds;
}

std::uint64_t dataset_content_hash(const TensorDataset& ds) {
  return fnv1a64(serialize_dataset(ds));
}

void atomic_write(const std::filesystem::path& path,
                  const std::vector<std::uint8_t>& bytes) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ArgumentError("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw ArgumentError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void save_dataset(const TensorDataset& ds, const std::filesystem::path& path) {
  atomic_write(path, serialize_dataset(ds));
}

TensorDataset load_dataset(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  ByteReader r{bytes};
  expect_magic(r, "DTEN");
  const std::uint16_t version = r.u16();
  if (version != 1)
    throw ParseError("unsupported DTEN version " + std::to_string(version),
                     r.pos - 2);
  const std::uint32_t order = r.u32();
  if (order == 0) throw ParseError("zero tensor order", r.pos - 4);
  std::vector<std::size_t> shape(order);
  for (auto& d : shape) {
    d = r.u32();
    if (d == 0) throw ParseError("zero mode dimension", r.pos - 4);
  }
  const std::uint32_t m = r.u32();
  if (m == 0) throw ParseError("empty dataset", r.pos - 4);
  const std::size_t per = numel(shape);
  const std::size_t expected = r.pos + static_cast<std::size_t>(m) * (1 + 8 * per);
  if (bytes.size() < expected)
    throw TruncationError("truncated: expected " + std::to_string(expected) +
                              " bytes, file has " +
                              std::to_string(bytes.size()),
                          bytes.size());
  if (bytes.size() > expected)
    throw ParseError("trailing bytes: expected " + std::to_string(expected) +
                         " bytes, file has " + std::to_string(bytes.size()),
                     expected);

  std::vector<DenseTensor> instances;
  std::vector<int> labels;
  instances.reserve(m);
  labels.reserve(m);
  for (std::uint32_t i = 0; i < m; ++i) {
    const std::size_t label_at = r.pos;
    const int label = r.i8();
    if (label != 1 && label != -1)
      throw LabelError("label must be -1 or +1, got " + std::to_string(label),
                       label_at);
    std::vector<double> vals(per);
    for (std::size_t v = 0; v < per; ++v) {
      const std::size_t at = r.pos;
      vals[v] = r.f64();
      if (!std::isfinite(vals[v]))
        throw ValueError("non-finite tensor entry", at);
    }
    instances.emplace_back(shape, std::move(vals));
    labels.push_back(label);
  }
  return make_dataset(std::move(instances), std::move(labels),
                      path.stem().string());
}

void save_dataset_text(const TensorDataset& ds,
                       const std::filesystem::path& path) {
  std::ostringstream out;
  out << "dten/1 N=" << ds.shape.size() << " dims=";
  for (std::size_t i = 0; i < ds.shape.size(); ++i)
    out << (i ? "x" : "") << ds.shape[i];
  out << " M=" << ds.size() << "\n";
  char num[64];
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out << (ds.labels[i] > 0 ? "+1" : "-1");
    for (double v : ds.instances[i].values()) {
      std::snprintf(num, sizeof num, " %.17g", v);
      out << num;
    }
    out << "\n";
  }
  const std::string s = out.str();
  atomic_write(path, std::vector<std::uint8_t>(s.begin(), s.end()));
}

TensorDataset load_dataset_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open " + path.string());
  std::string header;
  if (!std::getline(in, header))
    throw TruncationError("missing header line", 0);
  unsigned order = 0, m = 0;
  char dims_buf[256] = {0};
  if (std::sscanf(header.c_str(), "dten/1 N=%u dims=%255s M=%u", &order,
                  dims_buf, &m) != 3 ||
      order == 0 || m == 0)
    throw MagicError("bad text header: " + header, 0);
  std::vector<std::size_t> shape;
  {
    std::string dims(dims_buf);
    // sscanf captured "2x3x4 M=.." split at whitespace already; split on 'x'
    std::stringstream ss(dims);
    std::string part;
    while (std::getline(ss, part, 'x')) shape.push_back(std::stoul(part));
  }
  if (shape.size() != order)
    throw MagicError("dims count does not match N in header", 0);
  const std::size_t per = numel(shape);
  std::vector<DenseTensor> instances;
  std::vector<int> labels;
  for (unsigned i = 0; i < m; ++i) {
    std::string line;
    if (!std::getline(in, line))
      throw TruncationError("expected " + std::to_string(m) +
                                " instance lines, got " + std::to_string(i),
                            0);
    std::istringstream ls(line);
    int label;
    if (!(ls >> label)) throw LabelError("missing label on line", 0);
    if (label != 1 && label != -1)
      throw LabelError("label must be -1 or +1, got " + std::to_string(label),
                       0);
    std::vector<double> vals(per);
    for (std::size_t v = 0; v < per; ++v) {
      if (!(ls >> vals[v]))
        throw TruncationError("instance line has fewer than " +
                                  std::to_string(per) + " values",
                              0);
      if (!std::isfinite(vals[v]))
        throw ValueError("non-finite tensor entry", 0);
    }
    instances.emplace_back(shape, std::move(vals));
    labels.push_back(label);
  }
  return make_dataset(std::move(instances), std::move(labels),
                      path.stem().string());
}

DenseTensor rescale_unit(const DenseTensor& x) {
  double lo = x.values()[0], hi = x.values()[0];
  for (double v : x.values()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  std::vector<double> out(x.size());
  if (hi == lo) return DenseTensor(x.shape(), std::move(out));  // all zeros
  const double inv = 1.0 / (hi - lo);
  for (std::size_t i = 0; i < x.size(); ++i)
    out[i] = (x.values()[i] - lo) * inv;
  return DenseTensor(x.shape(), std::move(out));
}

TensorDataset rescale_dataset(const TensorDataset& ds) {
  std::vector<DenseTensor> scaled;
  scaled.reserve(ds.size());
  for (const auto& t : ds.instances) scaled.push_back(rescale_unit(t));
  return make_dataset(std::move(scaled), ds.labels, ds.name);
}

SynthResult synth_lowrank(std::vector<std::size_t> shape,
                          std::size_t rank_signal, std::size_t m_per_class,
                          double noise_sigma, std::uint64_t seed) {
  if (shape.empty()) throw ArgumentError("synth_lowrank: empty shape");
  for (std::size_t d : shape)
    if (d == 0) throw ArgumentError("synth_lowrank: zero mode dimension");
  if (rank_signal == 0) throw ArgumentError("synth_lowrank: rank must be >= 1");
  if (m_per_class == 0)
    throw ArgumentError("synth_lowrank: m_per_class must be >= 1");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto draw_model = [&]() {
    std::vector<Eigen::MatrixXd> factors(shape.size());
    for (std::size_t m = 0; m < shape.size(); ++m) {
      factors[m].resize(static_cast<Eigen::Index>(shape[m]),
                        static_cast<Eigen::Index>(rank_signal));
      for (Eigen::Index i = 0; i < factors[m].rows(); ++i)
        for (Eigen::Index r = 0; r < factors[m].cols(); ++r)
          factors[m](i, r) = gauss(rng);
    }
    return CpModel(shape, std::move(factors));
  };

  CpModel pos = draw_model();
  CpModel neg = draw_model();
  const DenseTensor pos_signal = reconstruct(pos);
  const DenseTensor neg_signal = reconstruct(neg);
  const std::size_t per = numel(shape);

  auto emit = [&](const DenseTensor& signal, std::vector<DenseTensor>& out) {
    const double sd =
        noise_sigma * norm(signal) / std::sqrt(static_cast<double>(per));
    for (std::size_t i = 0; i < m_per_class; ++i) {
      std::vector<double> vals = signal.values();
      for (double& v : vals) v += sd * gauss(rng);
      out.emplace_back(shape, std::move(vals));
    }
  };

  std::vector<DenseTensor> instances;
  instances.reserve(2 * m_per_class);
  emit(pos_signal, instances);
  emit(neg_signal, instances);
  std::vector<int> labels(2 * m_per_class, 1);
  for (std::size_t i = m_per_class; i < labels.size(); ++i) labels[i] = -1;

  SynthResult out{make_dataset(std::move(instances), std::move(labels),
                               "synth"),
                  std::move(pos), std::move(neg)};
  return out;
}

std::uint64_t cp_opts_digest(const CpOptions& opts) {
  ByteWriter w;
  w.u64(opts.max_iter);
  w.f64(opts.tol);
  w.u64(opts.seed);
  w.u8(opts.line_search ? 1 : 0);
  return fnv1a64(w.buf);
}

void save_cp_cache(const CpCache& cache, const std::filesystem::path& path) {
  if (cache.models.empty()) throw ArgumentError("empty CP cache");
  const auto& shape = cache.models[0].shape();
  ByteWriter w;
  w.raw("DCPC", 4);
  w.u16(1);
  w.u64(cache.dataset_hash);
  w.u32(static_cast<std::uint32_t>(cache.rank));
  w.u64(cache.opts_digest);
  w.u32(static_cast<std::uint32_t>(shape.size()));
  for (std::size_t d : shape) w.u32(static_cast<std::uint32_t>(d));
  w.u32(static_cast<std::uint32_t>(cache.models.size()));
  for (const auto& m : cache.models) write_factor_matrices(w, m);
  atomic_write(path, w.buf);
}

CpCache load_cp_cache(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  ByteReader r{bytes};
  expect_magic(r, "DCPC");
  const std::uint16_t version = r.u16();
  if (version != 1)
    throw ParseError("unsupported DCPC version " + std::to_string(version),
                     r.pos - 2);
  CpCache cache;
  cache.dataset_hash = r.u64();
  cache.rank = r.u32();
  cache.opts_digest = r.u64();
  const std::uint32_t order = r.u32();
  if (order == 0 || cache.rank == 0)
    throw ParseError("bad DCPC header", r.pos);
  std::vector<std::size_t> shape(order);
  for (auto& d : shape) d = r.u32();
  const std::uint32_t m = r.u32();
  cache.models.reserve(m);
  for (std::uint32_t i = 0; i < m; ++i)
    cache.models.push_back(read_cp_model(r, shape, cache.rank));
  if (r.pos != bytes.size())
    throw ParseError("trailing bytes in DCPC file", r.pos);
  return cache;
}

CpCache cache_load_or_compute(const TensorDataset& ds, std::size_t rank,
                              const CpOptions& opts,
                              const std::filesystem::path& path) {
  const std::uint64_t digest = cp_opts_digest(opts);
  if (std::filesystem::exists(path)) {
    try {
      CpCache cache = load_cp_cache(path);
      if (cache.dataset_hash == ds.content_hash && cache.rank == rank &&
          cache.opts_digest == digest && cache.models.size() == ds.size())
        return cache;
    } catch (const Error& e) {
      std::cerr << "warning: discarding corrupt CP cache " << path.string()
                << ": " << e.what() << "\n";
    }
  }
  CpCache cache;
  cache.dataset_hash = ds.content_hash;
  cache.rank = rank;
  cache.opts_digest = digest;
  cache.models = factorize_dataset(ds.instances, rank, opts);
  save_cp_cache(cache, path);
  return cache;
}

void save_svm_model(const SvmModel& model, const std::filesystem::path& path) {
  ByteWriter w;
  w.raw("DSVM", 4);
  w.u16(1);
  w.u8(model.spec.kind == KernelKind::rbf ? 1 : 0);
  w.f64(model.spec.sigma);
  w.u32(static_cast<std::uint32_t>(model.rank));
  w.f64(model.c);
  w.f64(model.bias);
  w.u32(static_cast<std::uint32_t>(model.alphas.size()));
  for (std::size_t i = 0; i < model.alphas.size(); ++i) {
    w.f64(model.alphas[i]);
    w.i8(static_cast<std::int8_t>(model.labels[i]));
  }
  w.u32(static_cast<std::uint32_t>(model.support_indices.size()));
  for (std::size_t s : model.support_indices)
    w.u32(static_cast<std::uint32_t>(s));
  w.u32(static_cast<std::uint32_t>(model.support_models.size()));
  if (!model.support_models.empty()) {
    const auto& shape = model.support_models[0].shape();
    w.u32(static_cast<std::uint32_t>(shape.size()));
    for (std::size_t d : shape) w.u32(static_cast<std::uint32_t>(d));
    for (const auto& m : model.support_models) write_factor_matrices(w, m);
  }
  atomic_write(path, w.buf);
}

SvmModel load_svm_model(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  ByteReader r{bytes};
  expect_magic(r, "DSVM");
  const std::uint16_t version = r.u16();
  if (version != 1)
    throw ParseError("unsupported DSVM version " + std::to_string(version),
                     r.pos - 2);
  SvmModel model;
  const std::uint8_t kind = r.u8();
  const double sigma = r.f64();
  model.spec = kind == 1 ? KernelSpec::rbf(sigma) : KernelSpec::linear();
  model.rank = r.u32();
  model.c = r.f64();
  model.bias = r.f64();
  const std::uint32_t m = r.u32();
  model.alphas.resize(m);
  model.labels.resize(m);
  for (std::uint32_t i = 0; i < m; ++i) {
    model.alphas[i] = r.f64();
    const std::size_t at = r.pos;
    model.labels[i] = r.i8();
    if (model.labels[i] != 1 && model.labels[i] != -1)
      throw LabelError("model label must be -1 or +1", at);
  }
  const std::uint32_t n_support = r.u32();
  model.support_indices.resize(n_support);
  for (auto& s : model.support_indices) s = r.u32();
  const std::uint32_t n_models = r.u32();
  if (n_models > 0) {
    const std::uint32_t order = r.u32();
    std::vector<std::size_t> shape(order);
    for (auto& d : shape) d = r.u32();
    model.support_models.reserve(n_models);
    for (std::uint32_t i = 0; i < n_models; ++i)
      model.support_models.push_back(read_cp_model(r, shape, model.rank));
  }
  if (r.pos != bytes.size())
    throw ParseError("trailing bytes in DSVM file", r.pos);
  return model;
}

void save_gram(const GramMatrix& gram, const std::filesystem::path& path) {
  ByteWriter w;
  w.raw("DGRM", 4);
  w.u16(1);
  w.u8(gram.spec().kind == KernelKind::rbf ? 1 : 0);
  w.f64(gram.spec().sigma);
  w.u32(static_cast<std::uint32_t>(gram.rank()));
  w.u32(static_cast<std::uint32_t>(gram.size()));
  for (std::size_t i = 0; i < gram.size(); ++i)
    for (std::size_t j = 0; j < gram.size(); ++j)
      w.f64(gram.entries()(i, j));
  atomic_write(path, w.buf);
}

GramMatrix load_gram(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  ByteReader r{bytes};
  expect_magic(r, "DGRM");
  const std::uint16_t version = r.u16();
  if (version != 1)
    throw ParseError("unsupported DGRM version " + std::to_string(version),
                     r.pos - 2);
  const std::uint8_t kind = r.u8();
  const double sigma = r.f64();
  const std::size_t rank = r.u32();
  const std::size_t m = r.u32();
  Eigen::MatrixXd entries(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      const std::size_t at = r.pos;
      entries(i, j) = r.f64();
      if (!std::isfinite(entries(i, j)))
        throw ValueError("non-finite Gram entry", at);
    }
  if (r.pos != bytes.size())
    throw ParseError("trailing bytes in DGRM file", r.pos);
  return GramMatrix(std::move(entries),
                    kind == 1 ? KernelSpec::rbf(sigma) : KernelSpec::linear(),
                    rank);
}

}  // namespace dusk
