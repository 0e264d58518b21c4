#include "mail/graph/corpus.hpp"

#include <boost/crc.hpp>
#include <cstdio>
#include <fstream>

#include "mail/error.hpp"

namespace mail::graph {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

ordered_json triples_to_json(const std::vector<Triple>& triples) {
  ordered_json out = ordered_json::array();
  for (const Triple& t : triples) out.push_back({t.head, t.relation, t.tail});
  return out;
}

std::vector<Triple> triples_from_json(const json& arr) {
  std::vector<Triple> out;
  for (const json& t : arr) {
    if (!t.is_array() || t.size() != 3) throw Error(ErrorCode::kParseError, "triple must be a 3-element array");
    out.push_back(Triple{t[0].get<std::string>(), t[1].get<std::string>(), t[2].get<std::string>()});
  }
  return out;
}

std::string crc_hex(std::uint32_t crc) {
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08x", crc);
  return buf;
}

}  // namespace

ordered_json instance_to_json(const CoupledInstance& instance) {
  ordered_json scene;
  scene["entities"] = instance.scene_graph.entities;
  scene["triples"] = triples_to_json(instance.scene_graph.triples);
  scene["mentions"] = instance.scene_graph.mentions;

  ordered_json concept_json;
  concept_json["entities"] = instance.concept_graph.entities;
  concept_json["triples"] = triples_to_json(instance.concept_graph.triples);
  ordered_json provenance = ordered_json::array();
  for (Provenance p : instance.concept_graph.provenance) provenance.push_back(std::string(to_string(p)));
  concept_json["provenance"] = std::move(provenance);

  ordered_json gold = ordered_json::array();
  for (const GoldAnswer& g : instance.gold_answers) {
    ordered_json entry;
    entry["entity"] = g.entity;
    entry["weight"] = g.weight;
    gold.push_back(std::move(entry));
  }

  ordered_json out;
  out["id"] = instance.id;
  out["scene"] = std::move(scene);
  out["concept"] = std::move(concept_json);
  out["question"] = instance.question;
  out["topic_entities"] = instance.topic_entities;
  out["gold_answers"] = std::move(gold);
  return out;
}

CoupledInstance instance_from_json(const json& record) {
  try {
    CoupledInstance inst;
    inst.id = record.at("id").get<std::string>();
    const json& scene = record.at("scene");
    inst.scene_graph.entities = scene.at("entities").get<std::set<std::string>>();
    inst.scene_graph.triples = triples_from_json(scene.at("triples"));
    inst.scene_graph.mentions = scene.at("mentions").get<std::vector<std::string>>();
    const json& cg = record.at("concept");
    inst.concept_graph.entities = cg.at("entities").get<std::set<std::string>>();
    inst.concept_graph.triples = triples_from_json(cg.at("triples"));
    for (const json& p : cg.at("provenance")) {
      auto tag = provenance_from_string(p.get<std::string>());
      if (!tag) throw Error(ErrorCode::kParseError, "unknown provenance tag " + p.dump());
      inst.concept_graph.provenance.push_back(*tag);
    }
    inst.question = record.at("question").get<std::string>();
    inst.topic_entities = record.at("topic_entities").get<std::vector<std::string>>();
    for (const json& g : record.at("gold_answers")) {
      inst.gold_answers.push_back(GoldAnswer{g.at("entity").get<std::string>(), g.at("weight").get<double>()});
    }
    return inst;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, e.what());
  }
}

std::string serialize_record(const CoupledInstance& instance) { return instance_to_json(instance).dump(); }

std::uint32_t record_checksum(std::string_view record) {
  boost::crc_32_type crc;
  crc.process_bytes(record.data(), record.size());
  return crc.checksum();
}

std::filesystem::path manifest_path(const std::filesystem::path& corpus_path) {
  std::filesystem::path p = corpus_path;
  p += ".manifest.json";
  return p;
}

CorpusManifest build_manifest(std::span<const CoupledInstance> corpus) {
  CorpusManifest manifest;
  for (const CoupledInstance& inst : corpus) {
    manifest.instances.push_back(ManifestEntry{inst.id, record_checksum(serialize_record(inst))});
  }
  manifest.relation_counts = relation_histogram(corpus);
  return manifest;
}

ordered_json manifest_to_json(const CorpusManifest& manifest) {
  ordered_json instances = ordered_json::array();
  for (const ManifestEntry& e : manifest.instances) {
    ordered_json entry;
    entry["id"] = e.id;
    entry["crc32"] = crc_hex(e.crc32);
    instances.push_back(std::move(entry));
  }
  ordered_json counts;
  const auto vocab = RelationVocabulary::standard().entries();
  for (std::size_t i = 0; i < vocab.size(); ++i) counts[std::string(vocab[i].name)] = manifest.relation_counts.counts[i];

  ordered_json out;
  out["format"] = "mail-corpus-manifest";
  out["version"] = 1;
  out["instances"] = std::move(instances);
  out["relation_counts"] = std::move(counts);
  out["total_scene_triples"] = manifest.relation_counts.total();
  return out;
}

CorpusManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read manifest " + path.string());
  try {
    const json doc = json::parse(in);
    CorpusManifest manifest;
    for (const json& e : doc.at("instances")) {
      manifest.instances.push_back(ManifestEntry{
          e.at("id").get<std::string>(),
          static_cast<std::uint32_t>(std::stoul(e.at("crc32").get<std::string>(), nullptr, 16))});
    }
    const json& counts = doc.at("relation_counts");
    const auto vocab = RelationVocabulary::standard().entries();
    for (std::size_t i = 0; i < vocab.size(); ++i) {
      manifest.relation_counts.counts[i] = counts.at(std::string(vocab[i].name)).get<std::size_t>();
    }
    return manifest;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, path.string() + ": " + e.what());
  } catch (const std::logic_error& e) {
    throw Error(ErrorCode::kParseError, path.string() + ": bad checksum field");
  }
}

void save_corpus(std::span<const CoupledInstance> corpus, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIoError, "cannot write corpus " + path.string());
    for (const CoupledInstance& inst : corpus) out << serialize_record(inst) << '\n';
    if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path.string());
  }
  std::ofstream out(manifest_path(path), std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write manifest for " + path.string());
  out << manifest_to_json(build_manifest(corpus)).dump(2) << '\n';
}

std::vector<CoupledInstance> load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read corpus " + path.string());
  std::vector<CoupledInstance> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::size_t record = out.size();
    try {
      out.push_back(instance_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kParseError, path.string() + ": record " + std::to_string(record) + " (line " +
                                              std::to_string(line_no) + "): " + e.what());
    } catch (const Error& e) {
      throw Error(ErrorCode::kParseError, path.string() + ": record " + std::to_string(record) + " (line " +
                                              std::to_string(line_no) + "): " + e.what());
    }
  }
  return out;
}

}  // namespace mail::graph
