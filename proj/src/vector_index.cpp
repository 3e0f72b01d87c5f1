#include "ragcap/vector_index.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "ragcap/common.hpp"
#include "ragcap/io.hpp"
#include "ragcap/rng.hpp"

namespace ragcap {

namespace {

constexpr char kIndexMagic[9] = "RAGCAPIX";
constexpr std::uint8_t kKindFlat = 0;
constexpr std::uint8_t kKindIvf = 1;

std::vector<float> normalize_to_f32(const EmbeddingVector& v) {
  const EmbeddingVector n = normalize(v);
  std::vector<float> out(n.size());
  for (std::size_t i = 0; i < n.size(); ++i) {
    out[i] = static_cast<float>(n[i]);
  }
  return out;
}

double dot_f32(const float* a, const float* b, std::size_t dim) {
  double acc = 0.0;
  for (std::size_t i = 0; i < dim; ++i) {
    acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  }
  return acc;
}

double clamp_score(double s) { return std::clamp(s, -1.0, 1.0); }

void sort_hits(std::vector<SearchHit>& hits) {
  std::sort(hits.begin(), hits.end(), [](const SearchHit& a, const SearchHit& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.record_id < b.record_id;
  });
}

std::size_t best_centroid(const std::vector<float>& centroids, std::size_t dim,
                          std::size_t n_clusters, const float* row) {
  std::size_t best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < n_clusters; ++c) {
    const double s = dot_f32(centroids.data() + c * dim, row, dim);
    if (s > best_score) {  // ties keep the lowest centroid index
      best_score = s;
      best = c;
    }
  }
  return best;
}

}  // namespace

EmbeddingVector normalize(const EmbeddingVector& v) {
  double norm_sq = 0.0;
  for (double x : v) {
    norm_sq += x * x;
  }
  if (norm_sq == 0.0) {
    throw DataError("cannot normalize zero vector");
  }
  const double inv = 1.0 / std::sqrt(norm_sq);
  EmbeddingVector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = v[i] * inv;
  }
  return out;
}

FlatIndex::FlatIndex(std::size_t dim) : dim_(dim) {
  if (dim == 0) {
    throw DataError("index dimension must be positive");
  }
}

void FlatIndex::add(std::int64_t id, const EmbeddingVector& v) {
  if (v.size() != dim_) {
    throw DataError("vector dimension mismatch on insert");
  }
  if (!id_set_.insert(id).second) {
    throw DataError("duplicate record id in index: " + std::to_string(id));
  }
  const std::vector<float> row = normalize_to_f32(v);
  ids_.push_back(id);
  data_.insert(data_.end(), row.begin(), row.end());
}

std::vector<SearchHit> FlatIndex::search(const EmbeddingVector& query,
                                         std::size_t k) const {
  if (query.size() != dim_) {
    throw DataError("query dimension mismatch");
  }
  if (ids_.empty()) {
    throw DataError("search on empty index");
  }
  const std::vector<float> q = normalize_to_f32(query);
  std::vector<SearchHit> hits;
  hits.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    const double s = dot_f32(data_.data() + i * dim_, q.data(), dim_);
    hits.push_back({ids_[i], clamp_score(s)});
  }
  sort_hits(hits);
  if (hits.size() > k) {
    hits.resize(k);
  }
  return hits;
}

void FlatIndex::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw DataError("cannot open for writing: " + path);
  }
  out.write(kIndexMagic, 8);
  write_u32(out, 1);
  write_u8(out, kKindFlat);
  write_u32(out, static_cast<std::uint32_t>(dim_));
  write_u64(out, ids_.size());
  for (float x : data_) {
    write_f32(out, x);
  }
  for (std::int64_t id : ids_) {
    write_i64(out, id);
  }
  if (!out) {
    throw DataError("write failed: " + path);
  }
}

FlatIndex FlatIndex::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("cannot open index file: " + path);
  }
  expect_magic(in, kIndexMagic, path);
  if (read_u32(in) != 1) {
    throw DataError("unsupported index version in " + path);
  }
  if (read_u8(in) != kKindFlat) {
    throw DataError("not a flat index: " + path);
  }
  const std::uint32_t dim = read_u32(in);
  const std::uint64_t count = read_u64(in);
  FlatIndex index(dim);
  index.data_.resize(count * dim);
  for (float& x : index.data_) {
    x = read_f32(in);
  }
  index.ids_.resize(count);
  for (std::int64_t& id : index.ids_) {
    id = read_i64(in);
    index.id_set_.insert(id);
  }
  return index;
}

std::vector<float> train_kmeans_centroids(const std::vector<float>& rows,
                                          std::size_t dim, std::size_t k,
                                          std::uint64_t seed,
                                          std::size_t iters,
                                          std::vector<double>* objective) {
  const std::size_t n = rows.size() / dim;
  if (n < k) {
    throw DataError("fewer vectors than clusters");
  }

  // Initial centroids: k distinct rows, chosen by a seeded partial
  // Fisher-Yates shuffle of the index set.
  SeededRng rng(seed);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.uniform_int(n - i);
    std::swap(order[i], order[j]);
  }
  std::vector<float> centroids(k * dim);
  for (std::size_t c = 0; c < k; ++c) {
    std::copy_n(rows.data() + order[c] * dim, dim, centroids.data() + c * dim);
  }

  std::vector<std::size_t> assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    assign[i] = best_centroid(centroids, dim, k, rows.data() + i * dim);
  }

  for (std::size_t it = 0; it < iters; ++it) {
    // Mean update, renormalized onto the sphere.
    std::vector<double> sums(k * dim, 0.0);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const float* row = rows.data() + i * dim;
      double* sum = sums.data() + assign[i] * dim;
      for (std::size_t d = 0; d < dim; ++d) {
        sum[d] += static_cast<double>(row[d]);
      }
      ++counts[assign[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      double norm_sq = 0.0;
      for (std::size_t d = 0; d < dim; ++d) {
        norm_sq += sums[c * dim + d] * sums[c * dim + d];
      }
      if (norm_sq == 0.0) continue;  // degenerate mean, keep old centroid
      const double inv = 1.0 / std::sqrt(norm_sq);
      for (std::size_t d = 0; d < dim; ++d) {
        centroids[c * dim + d] = static_cast<float>(sums[c * dim + d] * inv);
      }
    }

    // Reseed empty clusters with the point farthest from its centroid
    // (lowest similarity; ties broken by lowest point index).
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      std::size_t farthest = 0;
      double worst = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < n; ++i) {
        const double s = dot_f32(centroids.data() + assign[i] * dim,
                                 rows.data() + i * dim, dim);
        if (s < worst) {
          worst = s;
          farthest = i;
        }
      }
      std::copy_n(rows.data() + farthest * dim, dim, centroids.data() + c * dim);
    }

    for (std::size_t i = 0; i < n; ++i) {
      assign[i] = best_centroid(centroids, dim, k, rows.data() + i * dim);
    }

    if (objective != nullptr) {
      double obj = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const float* row = rows.data() + i * dim;
        const float* c = centroids.data() + assign[i] * dim;
        for (std::size_t d = 0; d < dim; ++d) {
          const double diff = static_cast<double>(row[d]) - static_cast<double>(c[d]);
          obj += diff * diff;
        }
      }
      objective->push_back(obj);
    }
  }
  return centroids;
}

IvfIndex train_ivf(
    const std::vector<std::pair<std::int64_t, EmbeddingVector>>& entries,
    std::size_t n_clusters, std::uint64_t seed, std::size_t iters) {
  if (n_clusters == 0) {
    throw DataError("cluster count must be positive");
  }
  if (entries.size() < n_clusters) {
    throw DataError("fewer vectors than clusters");
  }
  const std::size_t dim = entries.front().second.size();
  std::vector<float> rows;
  rows.reserve(entries.size() * dim);
  for (const auto& [id, v] : entries) {
    if (v.size() != dim) {
      throw DataError("inconsistent vector dimensions");
    }
    const std::vector<float> row = normalize_to_f32(v);
    rows.insert(rows.end(), row.begin(), row.end());
  }

  IvfIndex index;
  index.dim_ = dim;
  index.train_seed_ = seed;
  index.centroids_ = train_kmeans_centroids(rows, dim, n_clusters, seed, iters);
  index.list_ids_.resize(n_clusters);
  index.list_data_.resize(n_clusters);

  // Final assignment uses the stored (quantized) centroids so the
  // max-inner-product invariant holds for exactly what is persisted.
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const float* row = rows.data() + i * dim;
    const std::size_t c = best_centroid(index.centroids_, dim, n_clusters, row);
    index.list_ids_[c].push_back(entries[i].first);
    index.list_data_[c].insert(index.list_data_[c].end(), row, row + dim);
  }
  return index;
}

IvfIndex train_ivf(const std::vector<EmbeddingVector>& vectors,
                   std::size_t n_clusters, std::uint64_t seed,
                   std::size_t iters) {
  std::vector<std::pair<std::int64_t, EmbeddingVector>> entries;
  entries.reserve(vectors.size());
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    entries.emplace_back(static_cast<std::int64_t>(i), vectors[i]);
  }
  return train_ivf(entries, n_clusters, seed, iters);
}

std::size_t IvfIndex::size() const {
  std::size_t n = 0;
  for (const auto& l : list_ids_) {
    n += l.size();
  }
  return n;
}

std::vector<SearchHit> IvfIndex::search(const EmbeddingVector& query,
                                        std::size_t k,
                                        std::size_t nprobe) const {
  if (query.size() != dim_) {
    throw DataError("query dimension mismatch");
  }
  if (nprobe == 0 || nprobe > n_clusters()) {
    throw DataError("nprobe out of range");
  }
  const std::vector<float> q = normalize_to_f32(query);

  // Rank cells by centroid similarity, ties by ascending centroid index.
  std::vector<std::pair<double, std::size_t>> cells;
  cells.reserve(n_clusters());
  for (std::size_t c = 0; c < n_clusters(); ++c) {
    cells.emplace_back(dot_f32(centroids_.data() + c * dim_, q.data(), dim_), c);
  }
  std::sort(cells.begin(), cells.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });

  std::vector<SearchHit> hits;
  for (std::size_t p = 0; p < nprobe; ++p) {
    const std::size_t c = cells[p].second;
    const auto& ids = list_ids_[c];
    const auto& data = list_data_[c];
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const double s = dot_f32(data.data() + i * dim_, q.data(), dim_);
      hits.push_back({ids[i], clamp_score(s)});
    }
  }
  if (hits.empty()) {
    throw DataError("search on empty index");
  }
  sort_hits(hits);
  if (hits.size() > k) {
    hits.resize(k);
  }
  return hits;
}

void IvfIndex::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw DataError("cannot open for writing: " + path);
  }
  out.write(kIndexMagic, 8);
  write_u32(out, 1);
  write_u8(out, kKindIvf);
  write_u32(out, static_cast<std::uint32_t>(dim_));
  write_u64(out, size());
  write_u32(out, static_cast<std::uint32_t>(n_clusters()));
  write_u64(out, train_seed_);
  for (float x : centroids_) {
    write_f32(out, x);
  }
  // Cumulative list offsets, then all vectors and ids in list order.
  std::uint64_t offset = 0;
  write_u64(out, offset);
  for (const auto& l : list_ids_) {
    offset += l.size();
    write_u64(out, offset);
  }
  for (const auto& data : list_data_) {
    for (float x : data) {
      write_f32(out, x);
    }
  }
  for (const auto& ids : list_ids_) {
    for (std::int64_t id : ids) {
      write_i64(out, id);
    }
  }
  if (!out) {
    throw DataError("write failed: " + path);
  }
}

IvfIndex IvfIndex::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("cannot open index file: " + path);
  }
  expect_magic(in, kIndexMagic, path);
  if (read_u32(in) != 1) {
    throw DataError("unsupported index version in " + path);
  }
  if (read_u8(in) != kKindIvf) {
    throw DataError("not an IVF index: " + path);
  }
  IvfIndex index;
  index.dim_ = read_u32(in);
  const std::uint64_t count = read_u64(in);
  const std::uint32_t n_clusters = read_u32(in);
  index.train_seed_ = read_u64(in);
  index.centroids_.resize(n_clusters * index.dim_);
  for (float& x : index.centroids_) {
    x = read_f32(in);
  }
  std::vector<std::uint64_t> offsets(n_clusters + 1);
  for (auto& o : offsets) {
    o = read_u64(in);
  }
  if (offsets.back() != count) {
    throw DataError("corrupt IVF list offsets in " + path);
  }
  index.list_data_.resize(n_clusters);
  index.list_ids_.resize(n_clusters);
  for (std::size_t c = 0; c < n_clusters; ++c) {
    const std::size_t len = offsets[c + 1] - offsets[c];
    index.list_data_[c].resize(len * index.dim_);
    for (float& x : index.list_data_[c]) {
      x = read_f32(in);
    }
  }
  for (std::size_t c = 0; c < n_clusters; ++c) {
    index.list_ids_[c].resize(offsets[c + 1] - offsets[c]);
    for (std::int64_t& id : index.list_ids_[c]) {
      id = read_i64(in);
    }
  }
  return index;
}

}  // namespace ragcap
