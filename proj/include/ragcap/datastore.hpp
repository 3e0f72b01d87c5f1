#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "ragcap/tokenizer.hpp"
#include "ragcap/vector_index.hpp"

namespace ragcap {

struct CaptionRecord {
  std::int64_t id = 0;
  std::string text;
  std::vector<int> tokens;  // derived from text; not persisted
  std::string source;
  EmbeddingVector embedding;  // empty until supplied
};

struct IngestResult {
  std::vector<CaptionRecord> records;
  int dropped = 0;
};

// Tokenize, apply the strict length filter (token count < max_tokens) and
// assign sequential ids in input order. Raw items are (text, source) pairs.
// Throws DataError when everything is filtered out.
IngestResult ingest(const std::vector<std::pair<std::string, std::string>>& raw,
                    const Tokenizer& tokenizer, int max_tokens = 25,
                    bool dedup = false);

struct RetrievalHit {
  std::int64_t record_id;
  std::string source;
  double score;
};

struct RetrievalEvent {
  std::int64_t query_id;
  std::vector<RetrievalHit> hits;
};

// Append-only log of retrieval events; single writer.
struct RetrievalLog {
  std::vector<RetrievalEvent> events;
};

// Fraction of retrieved entries per source tag; sums to 1.
std::map<std::string, double> source_distribution(const RetrievalLog& log);

struct DatastoreOptions {
  std::size_t ivf_threshold = 10000;  // flat below, IVF at or above
  std::size_t ivf_clusters = 64;
  std::size_t nprobe = 16;
  std::uint64_t ivf_seed = 0;
};

// Immutable source-tagged caption collection with a prebuilt index.
// swap/augment return new stores and leave the input untouched.
class Datastore {
 public:
  static Datastore build(std::vector<CaptionRecord> records,
                         const DatastoreOptions& options = {});

  Datastore swap(std::vector<CaptionRecord> new_records) const;
  Datastore augment(std::vector<CaptionRecord> extra) const;

  // Top-k records for an image embedding, ordered by descending score with
  // ascending-id tie break. Appends one event to log when provided.
  std::vector<std::pair<const CaptionRecord*, double>> retrieve(
      const EmbeddingVector& image_embedding, std::size_t k = 4,
      RetrievalLog* log = nullptr, std::int64_t query_id = -1) const;

  std::size_t size() const { return records_.size(); }
  std::size_t dim() const { return dim_; }
  bool uses_ivf() const;
  const std::map<std::int64_t, CaptionRecord>& records() const {
    return records_;
  }
  const CaptionRecord& record(std::int64_t id) const;
  std::set<std::string> sources() const;

 private:
  Datastore() = default;

  std::map<std::int64_t, CaptionRecord> records_;
  std::size_t dim_ = 0;
  DatastoreOptions options_;
  // shared_ptr keeps store copies cheap; the index is immutable after build.
  std::shared_ptr<const std::variant<FlatIndex, IvfIndex>> index_;
};

// Line-delimited record persistence: one JSON object per line with keys
// id, text, source, embedding (in that order); JSON escaping covers
// embedded newlines.
void save_records(const std::string& path,
                  const std::vector<CaptionRecord>& records);
std::vector<CaptionRecord> load_records(const std::string& path);

void save_retrieval_log(const std::string& path, const RetrievalLog& log);
RetrievalLog load_retrieval_log(const std::string& path);

}  // namespace ragcap
