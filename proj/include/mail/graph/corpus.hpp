#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "mail/graph/coupled_graph.hpp"

namespace mail::graph {

// Corpus files are JSON Lines: one CoupledInstance per line, keys in field
// order. Each corpus has a sibling manifest (<corpus>.manifest.json) listing
// instance ids, per-record CRC-32 checksums and the scene relation counts.

nlohmann::ordered_json instance_to_json(const CoupledInstance& instance);
CoupledInstance instance_from_json(const nlohmann::json& record);

// Single-line record text (no trailing newline).
std::string serialize_record(const CoupledInstance& instance);
std::uint32_t record_checksum(std::string_view record);

std::filesystem::path manifest_path(const std::filesystem::path& corpus_path);

struct ManifestEntry {
  std::string id;
  std::uint32_t crc32 = 0;

  bool operator==(const ManifestEntry&) const = default;
};

struct CorpusManifest {
  std::vector<ManifestEntry> instances;
  RelationHistogram relation_counts;

  bool operator==(const CorpusManifest&) const = default;
};

CorpusManifest build_manifest(std::span<const CoupledInstance> corpus);
nlohmann::ordered_json manifest_to_json(const CorpusManifest& manifest);
CorpusManifest read_manifest(const std::filesystem::path& path);

// Writes the corpus and its manifest. Output bytes depend only on the data.
void save_corpus(std::span<const CoupledInstance> corpus, const std::filesystem::path& path);
// Throws Error(kParseError) naming the record index and line of the first
// malformed record. Relation membership is left to validate().
std::vector<CoupledInstance> load_corpus(const std::filesystem::path& path);

}  // namespace mail::graph
