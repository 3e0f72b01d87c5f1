#pragma once

#include <cstdint>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace ragcap {

// A caption or image embedding. Dimension is the vector length.
using EmbeddingVector = std::vector<double>;

// L2-normalize. Throws DataError on the zero vector.
EmbeddingVector normalize(const EmbeddingVector& v);

struct SearchHit {
  std::int64_t record_id;
  double score;  // cosine similarity, in [-1, 1]
};

// Exact inner-product search over unit vectors.
//
// Vectors are normalized in double precision and quantized to float32 at
// insertion; similarity accumulates in double over the stored float32
// values. Storing the quantized form is what makes save/load reproduce
// search results exactly and keeps score(a,b) == score(b,a) bitwise.
class FlatIndex {
 public:
  explicit FlatIndex(std::size_t dim);

  void add(std::int64_t id, const EmbeddingVector& v);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return ids_.size(); }
  const std::vector<std::int64_t>& ids() const { return ids_; }

  // Top-k by descending score, ties by ascending record id. Returns
  // min(k, size()) hits. Throws DataError on dim mismatch or empty index.
  std::vector<SearchHit> search(const EmbeddingVector& query,
                                std::size_t k) const;

  void save(const std::string& path) const;
  static FlatIndex load(const std::string& path);

 private:
  std::size_t dim_;
  std::vector<std::int64_t> ids_;
  std::unordered_set<std::int64_t> id_set_;
  std::vector<float> data_;  // row-major unit vectors
};

// Inverted-file index: spherical k-means centroids plus per-centroid entry
// lists; queries probe the nprobe closest cells.
class IvfIndex {
 public:
  std::size_t dim() const { return dim_; }
  std::size_t size() const;
  std::size_t n_clusters() const { return list_ids_.size(); }
  std::uint64_t train_seed() const { return train_seed_; }
  const std::vector<std::int64_t>& list_ids(std::size_t c) const {
    return list_ids_[c];
  }

  std::vector<SearchHit> search(const EmbeddingVector& query, std::size_t k,
                                std::size_t nprobe) const;

  void save(const std::string& path) const;
  static IvfIndex load(const std::string& path);

  friend IvfIndex train_ivf(
      const std::vector<std::pair<std::int64_t, EmbeddingVector>>& entries,
      std::size_t n_clusters, std::uint64_t seed, std::size_t iters);

 private:
  std::size_t dim_ = 0;
  std::uint64_t train_seed_ = 0;
  std::vector<float> centroids_;  // n_clusters x dim, unit rows
  std::vector<std::vector<std::int64_t>> list_ids_;
  std::vector<std::vector<float>> list_data_;
};

// Seeded spherical k-means over normalized float32 rows. Initial centroids
// are sampled uniformly from the input without replacement; Lloyd updates
// renormalize the mean; a cluster left empty is reseeded with the point
// farthest from its assigned centroid. If objective is non-null it receives
// the sum of squared distances after each iteration.
std::vector<float> train_kmeans_centroids(const std::vector<float>& rows,
                                          std::size_t dim, std::size_t k,
                                          std::uint64_t seed,
                                          std::size_t iters,
                                          std::vector<double>* objective = nullptr);

IvfIndex train_ivf(
    const std::vector<std::pair<std::int64_t, EmbeddingVector>>& entries,
    std::size_t n_clusters, std::uint64_t seed, std::size_t iters = 25);

// Convenience overload: record ids are the input positions.
IvfIndex train_ivf(const std::vector<EmbeddingVector>& vectors,
                   std::size_t n_clusters, std::uint64_t seed,
                   std::size_t iters = 25);

}  // namespace ragcap
