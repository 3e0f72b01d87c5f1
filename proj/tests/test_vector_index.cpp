#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <set>

#include "ragcap/common.hpp"
#include "ragcap/hash.hpp"
#include "ragcap/io.hpp"
#include "ragcap/rng.hpp"
#include "ragcap/vector_index.hpp"

using namespace ragcap;

namespace {

std::vector<EmbeddingVector> random_unit_vectors(std::size_t count,
                                                 std::size_t dim,
                                                 std::uint64_t seed) {
  SeededRng rng(seed);
  std::vector<EmbeddingVector> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    EmbeddingVector v(dim);
    for (double& x : v) {
      x = rng.gaussian();
    }
    out.push_back(normalize(v));
  }
  return out;
}

// Exhaustive-scan oracle: normalize query and entries the same way the
// index does (float32 storage, double accumulation) and sort by
// (-score, id).
std::vector<std::int64_t> brute_force_top_ids(
    const std::vector<EmbeddingVector>& entries, const EmbeddingVector& query,
    std::size_t k) {
  const EmbeddingVector qn = normalize(query);
  std::vector<std::pair<double, std::int64_t>> scored;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const EmbeddingVector en = normalize(entries[i]);
    double s = 0.0;
    for (std::size_t d = 0; d < en.size(); ++d) {
      s += static_cast<double>(static_cast<float>(en[d])) *
           static_cast<double>(static_cast<float>(qn[d]));
    }
    scored.emplace_back(s, static_cast<std::int64_t>(i));
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<std::int64_t> ids;
  for (std::size_t i = 0; i < std::min(k, scored.size()); ++i) {
    ids.push_back(scored[i].second);
  }
  return ids;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("normalize basic cases") {
  const EmbeddingVector v = normalize({3.0, 4.0});
  CHECK(v[0] == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(v[1] == doctest::Approx(0.8).epsilon(1e-12));

  const EmbeddingVector unit = normalize({1.0, 0.0, 0.0});
  CHECK(unit[0] == 1.0);
  CHECK(unit[1] == 0.0);

  CHECK_THROWS_AS(normalize({0.0, 0.0}), DataError);
}

TEST_CASE("flat search basics") {
  FlatIndex index(2);
  index.add(0, {1.0, 0.0});
  index.add(1, {0.0, 1.0});

  SUBCASE("self similarity puts the stored vector first with score 1") {
    const auto hits = index.search({1.0, 0.0}, 1);
    REQUIRE(hits.size() == 1);
    CHECK(hits[0].record_id == 0);
    CHECK(hits[0].score == doctest::Approx(1.0).epsilon(1e-6));
  }

  SUBCASE("orthogonal basis") {
    const auto hits = index.search({1.0, 0.0}, 2);
    REQUIRE(hits.size() == 2);
    CHECK(hits[0].record_id == 0);
    CHECK(hits[0].score == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(hits[1].record_id == 1);
    CHECK(hits[1].score == doctest::Approx(0.0).epsilon(1e-12));
  }

  SUBCASE("k larger than the index is capped") {
    CHECK(index.search({0.5, 0.5}, 10).size() == 2);
  }

  SUBCASE("errors") {
    CHECK_THROWS_AS(index.search({1.0, 0.0, 0.0}, 1), DataError);
    FlatIndex empty(2);
    CHECK_THROWS_AS(empty.search({1.0, 0.0}, 1), DataError);
    CHECK_THROWS_AS(index.add(0, {1.0, 1.0}), DataError);
  }
}

TEST_CASE("flat search matches the exhaustive-scan oracle") {
  const std::size_t dim = 16;
  const auto entries = random_unit_vectors(200, dim, 11);
  FlatIndex index(dim);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    index.add(static_cast<std::int64_t>(i), entries[i]);
  }
  const auto queries = random_unit_vectors(20, dim, 12);
  for (const auto& q : queries) {
    const auto hits = index.search(q, 10);
    const auto expected = brute_force_top_ids(entries, q, 10);
    REQUIRE(hits.size() == expected.size());
    for (std::size_t i = 0; i < hits.size(); ++i) {
      CHECK(hits[i].record_id == expected[i]);
    }
  }
}

TEST_CASE("flat search properties") {
  const std::size_t dim = 8;
  const auto entries = random_unit_vectors(50, dim, 21);

  SUBCASE("k = size returns every record exactly once") {
    FlatIndex index(dim);
    for (std::size_t i = 0; i < entries.size(); ++i) {
      index.add(static_cast<std::int64_t>(i), entries[i]);
    }
    const auto hits = index.search(entries[0], entries.size());
    std::set<std::int64_t> ids;
    for (const auto& hit : hits) {
      ids.insert(hit.record_id);
    }
    CHECK(ids.size() == entries.size());
  }

  SUBCASE("results invariant to insertion order") {
    FlatIndex forward(dim);
    FlatIndex backward(dim);
    for (std::size_t i = 0; i < entries.size(); ++i) {
      forward.add(static_cast<std::int64_t>(i), entries[i]);
    }
    for (std::size_t i = entries.size(); i-- > 0;) {
      backward.add(static_cast<std::int64_t>(i), entries[i]);
    }
    const auto q = random_unit_vectors(1, dim, 22).front();
    const auto a = forward.search(q, 10);
    const auto b = backward.search(q, 10);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].record_id == b[i].record_id);
      CHECK(a[i].score == b[i].score);
    }
  }

  SUBCASE("score symmetry is exact on stored representations") {
    FlatIndex ab(dim);
    ab.add(0, entries[0]);
    FlatIndex ba(dim);
    ba.add(0, entries[1]);
    const double s_ab = ab.search(entries[1], 1).front().score;
    const double s_ba = ba.search(entries[0], 1).front().score;
    CHECK(s_ab == doctest::Approx(s_ba).epsilon(1e-9));
    CHECK(s_ab == s_ba);  // identical products, identical summation order
  }
}

TEST_CASE("ivf training on separated clusters") {
  // Two clusters around +e0 and +e1 with small noise.
  SeededRng rng(33);
  std::vector<std::pair<std::int64_t, EmbeddingVector>> entries;
  std::vector<int> truth;
  for (int i = 0; i < 40; ++i) {
    const int cluster = i % 2;
    EmbeddingVector v(4, 0.0);
    v[static_cast<std::size_t>(cluster)] = 1.0;
    for (double& x : v) {
      x += 0.05 * rng.gaussian();
    }
    entries.emplace_back(i, normalize(v));
    truth.push_back(cluster);
  }
  const IvfIndex index = train_ivf(entries, 2, 7);

  // Verify by exhaustive check: members of one inverted list must be
  // exactly one ground-truth cluster.
  for (std::size_t c = 0; c < 2; ++c) {
    std::set<int> clusters_seen;
    for (std::int64_t id : index.list_ids(c)) {
      clusters_seen.insert(truth[static_cast<std::size_t>(id)]);
    }
    CHECK(clusters_seen.size() == 1);
  }
  CHECK(index.list_ids(0).size() + index.list_ids(1).size() == entries.size());

  SUBCASE("nprobe=1 near cluster A returns only cluster-A records") {
    EmbeddingVector q(4, 0.0);
    q[0] = 1.0;
    const auto hits = index.search(q, 10, 1);
    for (const auto& hit : hits) {
      CHECK(truth[static_cast<std::size_t>(hit.record_id)] ==
            truth[static_cast<std::size_t>(hits.front().record_id)]);
    }
  }
}

TEST_CASE("ivf edge cases") {
  const auto vectors = random_unit_vectors(8, 4, 44);

  SUBCASE("one point per cluster when n_clusters == n") {
    const IvfIndex index = train_ivf(vectors, vectors.size(), 1);
    for (std::size_t c = 0; c < index.n_clusters(); ++c) {
      CHECK(index.list_ids(c).size() == 1);
    }
  }

  SUBCASE("determinism: same seed, bit-identical file") {
    const std::string path_a = temp_path("ragcap_ivf_a.bin");
    const std::string path_b = temp_path("ragcap_ivf_b.bin");
    train_ivf(vectors, 3, 99).save(path_a);
    train_ivf(vectors, 3, 99).save(path_b);
    CHECK(sha256_file_hex(path_a) == sha256_file_hex(path_b));
    std::remove(path_a.c_str());
    std::remove(path_b.c_str());
  }

  SUBCASE("fewer vectors than clusters") {
    CHECK_THROWS_AS(train_ivf(vectors, 100, 1), DataError);
  }

  SUBCASE("nprobe out of range") {
    const IvfIndex index = train_ivf(vectors, 3, 1);
    CHECK_THROWS_AS(index.search(vectors[0], 2, 0), DataError);
    CHECK_THROWS_AS(index.search(vectors[0], 2, 4), DataError);
  }
}

TEST_CASE("ivf with nprobe = n_clusters equals flat search") {
  const std::size_t dim = 12;
  const auto vectors = random_unit_vectors(120, dim, 55);
  FlatIndex flat(dim);
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    flat.add(static_cast<std::int64_t>(i), vectors[i]);
  }
  const IvfIndex ivf = train_ivf(vectors, 8, 3);
  const auto queries = random_unit_vectors(10, dim, 56);
  for (const auto& q : queries) {
    const auto a = flat.search(q, 7);
    const auto b = ivf.search(q, 7, ivf.n_clusters());
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].record_id == b[i].record_id);
      CHECK(a[i].score == b[i].score);
    }
  }
}

TEST_CASE("kmeans objective is non-increasing") {
  const auto vectors = random_unit_vectors(150, 8, 77);
  std::vector<float> rows;
  for (const auto& v : vectors) {
    for (double x : v) {
      rows.push_back(static_cast<float>(x));
    }
  }
  std::vector<double> objective;
  train_kmeans_centroids(rows, 8, 10, 5, 20, &objective);
  REQUIRE(objective.size() == 20);
  for (std::size_t i = 1; i < objective.size(); ++i) {
    CHECK(objective[i] <= objective[i - 1] + 1e-9);
  }
}

TEST_CASE("index persistence round-trips search results exactly") {
  const std::size_t dim = 10;
  const auto vectors = random_unit_vectors(60, dim, 88);
  const auto queries = random_unit_vectors(5, dim, 89);

  SUBCASE("flat") {
    FlatIndex index(dim);
    for (std::size_t i = 0; i < vectors.size(); ++i) {
      index.add(static_cast<std::int64_t>(i) * 3, vectors[i]);
    }
    const std::string path = temp_path("ragcap_flat.bin");
    index.save(path);
    const FlatIndex loaded = FlatIndex::load(path);
    for (const auto& q : queries) {
      const auto a = index.search(q, 9);
      const auto b = loaded.search(q, 9);
      REQUIRE(a.size() == b.size());
      for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].record_id == b[i].record_id);
        CHECK(a[i].score == b[i].score);
      }
    }
    std::remove(path.c_str());
  }

  SUBCASE("ivf") {
    const IvfIndex index = train_ivf(vectors, 6, 4);
    const std::string path = temp_path("ragcap_ivf.bin");
    index.save(path);
    const IvfIndex loaded = IvfIndex::load(path);
    CHECK(loaded.train_seed() == index.train_seed());
    for (const auto& q : queries) {
      const auto a = index.search(q, 9, 3);
      const auto b = loaded.search(q, 9, 3);
      REQUIRE(a.size() == b.size());
      for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].record_id == b[i].record_id);
        CHECK(a[i].score == b[i].score);
      }
    }
    std::remove(path.c_str());
  }
}
