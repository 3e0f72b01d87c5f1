#include "ragcap/datastore.hpp"

#include <fstream>
#include <set>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "ragcap/common.hpp"

namespace ragcap {

using ordered_json = nlohmann::ordered_json;

IngestResult ingest(const std::vector<std::pair<std::string, std::string>>& raw,
                    const Tokenizer& tokenizer, int max_tokens, bool dedup) {
  IngestResult result;
  std::unordered_set<std::string> seen_texts;
  std::int64_t next_id = 0;
  for (const auto& [text, source] : raw) {
    if (source.empty()) {
      throw DataError("caption source tag is empty");
    }
    std::vector<int> tokens = tokenizer.encode(text);
    if (static_cast<int>(tokens.size()) >= max_tokens) {
      ++result.dropped;
      continue;
    }
    if (dedup && !seen_texts.insert(text).second) {
      ++result.dropped;
      continue;
    }
    CaptionRecord record;
    record.id = next_id++;
    record.text = text;
    record.tokens = std::move(tokens);
    record.source = source;
    result.records.push_back(std::move(record));
  }
  if (result.records.empty()) {
    throw DataError("no captions survive the length filter");
  }
  return result;
}

std::map<std::string, double> source_distribution(const RetrievalLog& log) {
  if (log.events.empty()) {
    throw DataError("retrieval log is empty");
  }
  std::map<std::string, std::size_t> counts;
  std::size_t total = 0;
  for (const auto& event : log.events) {
    for (const auto& hit : event.hits) {
      ++counts[hit.source];
      ++total;
    }
  }
  if (total == 0) {
    throw DataError("retrieval log has no hits");
  }
  std::map<std::string, double> out;
  for (const auto& [source, count] : counts) {
    out[source] = static_cast<double>(count) / static_cast<double>(total);
  }
  return out;
}

Datastore Datastore::build(std::vector<CaptionRecord> records,
                           const DatastoreOptions& options) {
  if (records.empty()) {
    throw DataError("cannot build an empty datastore");
  }
  Datastore store;
  store.options_ = options;
  store.dim_ = records.front().embedding.size();
  if (store.dim_ == 0) {
    throw DataError("records are missing embeddings");
  }
  for (auto& record : records) {
    if (record.embedding.size() != store.dim_) {
      throw DataError("record embedding dimension mismatch");
    }
    if (record.source.empty()) {
      throw DataError("caption source tag is empty");
    }
    const std::int64_t id = record.id;
    if (!store.records_.emplace(id, std::move(record)).second) {
      throw DataError("duplicate record id: " + std::to_string(id));
    }
  }

  if (store.records_.size() >= options.ivf_threshold &&
      store.records_.size() >= options.ivf_clusters) {
    std::vector<std::pair<std::int64_t, EmbeddingVector>> entries;
    entries.reserve(store.records_.size());
    for (const auto& [id, record] : store.records_) {
      entries.emplace_back(id, record.embedding);
    }
    store.index_ = std::make_shared<const std::variant<FlatIndex, IvfIndex>>(
        train_ivf(entries, options.ivf_clusters, options.ivf_seed));
  } else {
    FlatIndex index(store.dim_);
    for (const auto& [id, record] : store.records_) {
      index.add(id, record.embedding);
    }
    store.index_ = std::make_shared<const std::variant<FlatIndex, IvfIndex>>(
        std::move(index));
  }
  return store;
}

bool Datastore::uses_ivf() const {
  return std::holds_alternative<IvfIndex>(*index_);
}

Datastore Datastore::swap(std::vector<CaptionRecord> new_records) const {
  if (new_records.empty()) {
    throw DataError("swap requires a non-empty record set");
  }
  for (const auto& record : new_records) {
    if (record.embedding.size() != dim_) {
      throw DataError("swap records have mismatched embedding dimension");
    }
  }
  return build(std::move(new_records), options_);
}

Datastore Datastore::augment(std::vector<CaptionRecord> extra) const {
  std::vector<CaptionRecord> merged;
  merged.reserve(records_.size() + extra.size());
  for (const auto& [id, record] : records_) {
    merged.push_back(record);
  }
  for (auto& record : extra) {
    if (records_.count(record.id) != 0) {
      throw DataError("augment id collision: " + std::to_string(record.id));
    }
    merged.push_back(std::move(record));
  }
  return build(std::move(merged), options_);
}

std::vector<std::pair<const CaptionRecord*, double>> Datastore::retrieve(
    const EmbeddingVector& image_embedding, std::size_t k, RetrievalLog* log,
    std::int64_t query_id) const {
  if (records_.empty()) {
    throw DataError("retrieve on empty datastore");
  }
  std::vector<SearchHit> hits;
  if (const auto* flat = std::get_if<FlatIndex>(index_.get())) {
    hits = flat->search(image_embedding, k);
  } else {
    const auto& ivf = std::get<IvfIndex>(*index_);
    const std::size_t nprobe = std::min(options_.nprobe, ivf.n_clusters());
    hits = ivf.search(image_embedding, k, nprobe);
  }

  std::vector<std::pair<const CaptionRecord*, double>> out;
  out.reserve(hits.size());
  for (const auto& hit : hits) {
    out.emplace_back(&record(hit.record_id), hit.score);
  }
  if (log != nullptr) {
    RetrievalEvent event;
    event.query_id = query_id;
    for (const auto& [record, score] : out) {
      event.hits.push_back({record->id, record->source, score});
    }
    log->events.push_back(std::move(event));
  }
  return out;
}

const CaptionRecord& Datastore::record(std::int64_t id) const {
  auto it = records_.find(id);
  if (it == records_.end()) {
    throw DataError("unknown record id: " + std::to_string(id));
  }
  return it->second;
}

std::set<std::string> Datastore::sources() const {
  std::set<std::string> out;
  for (const auto& [id, record] : records_) {
    out.insert(record.source);
  }
  return out;
}

void save_records(const std::string& path,
                  const std::vector<CaptionRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw DataError("cannot open for writing: " + path);
  }
  for (const auto& record : records) {
    ordered_json line;
    line["id"] = record.id;
    line["text"] = record.text;
    line["source"] = record.source;
    line["embedding"] = record.embedding;
    out << line.dump() << "\n";
  }
  if (!out) {
    throw DataError("write failed: " + path);
  }
}

std::vector<CaptionRecord> load_records(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("cannot open records file: " + path);
  }
  std::vector<CaptionRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    ordered_json parsed;
    try {
      parsed = ordered_json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": bad record line: " + e.what());
    }
    CaptionRecord record;
    record.id = parsed.at("id").get<std::int64_t>();
    record.text = parsed.at("text").get<std::string>();
    record.source = parsed.at("source").get<std::string>();
    record.embedding = parsed.at("embedding").get<EmbeddingVector>();
    records.push_back(std::move(record));
  }
  return records;
}

void save_retrieval_log(const std::string& path, const RetrievalLog& log) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw DataError("cannot open for writing: " + path);
  }
  for (const auto& event : log.events) {
    ordered_json line;
    line["query_id"] = event.query_id;
    ordered_json hits = ordered_json::array();
    for (const auto& hit : event.hits) {
      hits.push_back({{"record_id", hit.record_id},
                      {"source", hit.source},
                      {"score", hit.score}});
    }
    line["hits"] = hits;
    out << line.dump() << "\n";
  }
}

RetrievalLog load_retrieval_log(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("cannot open retrieval log: " + path);
  }
  RetrievalLog log;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const ordered_json parsed = ordered_json::parse(line);
    RetrievalEvent event;
    event.query_id = parsed.at("query_id").get<std::int64_t>();
    for (const auto& hit : parsed.at("hits")) {
      event.hits.push_back({hit.at("record_id").get<std::int64_t>(),
                            hit.at("source").get<std::string>(),
                            hit.at("score").get<double>()});
    }
    log.events.push_back(std::move(event));
  }
  return log;
}

}  // namespace ragcap
