#include "steval/evalset.hpp"

#include <algorithm>
#include <charconv>
#include <set>

#include <json.hpp>

#include "steval/error.hpp"
#include "steval/textproc.hpp"
#include "steval/util.hpp"

namespace steval::evalset {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string_view to_string(Task task) {
  switch (task) {
    case Task::Offline:
      return "offline";
    case Task::Multilingual:
      return "multilingual";
    case Task::Simultaneous:
      return "simultaneous";
  }
  return "?";
}

std::string_view to_string(Domain domain) { return domain == Domain::TED ? "TED" : "ACL"; }

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace

Task parse_task(std::string_view name) {
  std::string n = lower(name);
  if (n == "offline") return Task::Offline;
  if (n == "multilingual" || n == "multi") return Task::Multilingual;
  if (n == "simultaneous" || n == "simul") return Task::Simultaneous;
  throw ValidationError("unknown task '" + std::string(name) + "'");
}

Domain parse_domain(std::string_view name) {
  std::string n = lower(name);
  if (n == "ted") return Domain::TED;
  if (n == "acl") return Domain::ACL;
  throw ValidationError("unknown domain '" + std::string(name) + "'");
}

LanguagePair LanguagePair::parse(std::string_view text) {
  auto dash = text.find('-');
  if (dash == std::string_view::npos || dash == 0 || dash + 1 == text.size() ||
      text.find('-', dash + 1) != std::string_view::npos) {
    throw ValidationError("malformed language pair '" + std::string(text) + "' (expected src-tgt)");
  }
  return {std::string(text.substr(0, dash)), std::string(text.substr(dash + 1))};
}

std::string Condition::str() const {
  return std::string(to_string(task)) + "/" + langs.str() + "/" + std::string(to_string(domain));
}

void Condition::validate() const {
  bool ok = domain == Domain::TED ? (task == Task::Offline || task == Task::Simultaneous)
                                  : (task == Task::Offline || task == Task::Multilingual);
  if (!ok) throw ValidationError("condition " + str() + " does not exist (TED: offline/simultaneous, ACL: offline/multilingual)");
}

Condition make_condition(std::string_view task, std::string_view langs, std::string_view domain) {
  Condition c{parse_task(task), LanguagePair::parse(langs), parse_domain(domain)};
  c.validate();
  return c;
}

std::string make_segment_id(std::string_view doc_id, std::size_t index) {
  return std::string(doc_id) + ":" + std::to_string(index);
}

std::pair<std::string, std::size_t> parse_segment_id(std::string_view segment_id) {
  auto colon = segment_id.rfind(':');
  if (colon == std::string_view::npos) throw ValidationError("malformed segment id '" + std::string(segment_id) + "'");
  std::size_t index = 0;
  auto tail = segment_id.substr(colon + 1);
  auto res = std::from_chars(tail.data(), tail.data() + tail.size(), index);
  if (tail.empty() || res.ec != std::errc() || res.ptr != tail.data() + tail.size()) {
    throw ValidationError("malformed segment id '" + std::string(segment_id) + "'");
  }
  return {std::string(segment_id.substr(0, colon)), index};
}

const Document* TestSet::find_document(std::string_view doc_id) const {
  for (const auto& d : documents) {
    if (d.doc_id == doc_id) return &d;
  }
  return nullptr;
}

const Document& TestSet::document(std::string_view doc_id) const {
  if (const Document* d = find_document(doc_id)) return *d;
  throw ValidationError("unknown document '" + std::string(doc_id) + "'");
}

std::size_t TestSet::segment_count() const {
  std::size_t n = 0;
  for (const auto& d : documents) n += d.segments.size();
  return n;
}

bool TestSet::has_segment(std::string_view segment_id) const {
  auto colon = segment_id.rfind(':');
  if (colon == std::string_view::npos) return false;
  try {
    auto [doc_id, index] = parse_segment_id(segment_id);
    const Document* d = find_document(doc_id);
    return d && index < d->segments.size();
  } catch (const ValidationError&) {
    return false;
  }
}

std::vector<std::string> TestSet::segment_ids() const {
  std::vector<std::string> ids;
  ids.reserve(segment_count());
  for (const auto& d : documents) {
    for (const auto& s : d.segments) ids.push_back(s.segment_id);
  }
  return ids;
}

fs::path manifest_path(const fs::path& path) {
  return fs::is_directory(path) ? path / "manifest.json" : path;
}

namespace {

std::vector<std::string> read_text_lines(const fs::path& path) {
  std::vector<std::string> lines = util::read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    try {
      lines[i] = text::normalize_nfc(lines[i]);
    } catch (const ValidationError& e) {
      throw ValidationError(path.string() + ":" + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return lines;
}

std::string require_string(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key) || !obj[key].is_string()) {
    throw ValidationError(where + ": missing string field '" + key + "'");
  }
  return obj[key].get<std::string>();
}

struct HypothesisFile {
  std::vector<std::string> lines;
  bool header = false;
};

HypothesisFile read_hypothesis_file(const fs::path& path) {
  HypothesisFile f;
  f.lines = read_text_lines(path);
  if (!f.lines.empty() && f.lines.front() == kResegmentedHeader) {
    f.header = true;
    f.lines.erase(f.lines.begin());
  }
  if (f.lines.empty()) throw ValidationError(path.string() + ": hypothesis file is empty");
  return f;
}

}  // namespace

SystemOutput load_system_output(const SystemFiles& files, const Condition& condition, const TestSet& testset) {
  if (files.files.empty()) throw ValidationError("system '" + files.system_id + "' lists no files");
  SystemOutput out;
  out.system_id = files.system_id;
  out.condition = condition;
  bool all_flagged = true;
  bool counts_match = true;
  for (const auto& [doc_id, path] : files.files) {
    const Document* doc = testset.find_document(doc_id);
    if (!doc) throw ValidationError(path.string() + ": unknown doc_id '" + doc_id + "' for system '" + files.system_id + "'");
    HypothesisFile f = read_hypothesis_file(path);
    all_flagged = all_flagged && f.header;
    counts_match = counts_match && f.lines.size() == doc->segments.size();
    out.documents.emplace(doc_id, std::move(f.lines));
  }
  out.resegmented = all_flagged && counts_match;
  return out;
}

void write_hypothesis_file(const fs::path& path, const std::vector<std::string>& lines, bool resegmented) {
  std::string content;
  if (resegmented) {
    content += kResegmentedHeader;
    content += '\n';
  }
  for (const auto& l : lines) {
    content += l;
    content += '\n';
  }
  util::write_file(path, content);
}

TestSet load_testset(const fs::path& path) {
  const fs::path manifest_file = manifest_path(path);
  const fs::path base = manifest_file.parent_path();
  const std::string where = manifest_file.string();

  json manifest;
  try {
    manifest = json::parse(util::read_file(manifest_file));
  } catch (const json::parse_error& e) {
    throw ValidationError(where + ": " + e.what());
  }

  TestSet ts;
  if (!manifest.contains("condition")) throw ValidationError(where + ": missing 'condition'");
  const json& cond = manifest["condition"];
  ts.condition = make_condition(require_string(cond, "task", where + " condition"),
                                require_string(cond, "langs", where + " condition"),
                                require_string(cond, "domain", where + " condition"));

  if (!manifest.contains("documents") || !manifest["documents"].is_array() || manifest["documents"].empty()) {
    throw ValidationError(where + ": 'documents' must be a non-empty array");
  }

  std::set<std::string> seen_segments;
  std::map<std::string, SystemFiles> system_files;
  std::optional<std::set<std::string>> ref_names;

  for (std::size_t d = 0; d < manifest["documents"].size(); ++d) {
    const json& entry = manifest["documents"][d];
    const std::string dwhere = where + " documents[" + std::to_string(d) + "]";
    Document doc;
    doc.doc_id = require_string(entry, "doc_id", dwhere);
    if (doc.doc_id.empty()) throw ValidationError(dwhere + ": empty doc_id");

    const fs::path source_file = base / require_string(entry, "source", dwhere);
    std::vector<std::string> sources = read_text_lines(source_file);
    if (sources.empty()) throw ValidationError(source_file.string() + ": document '" + doc.doc_id + "' has no segments");

    if (!entry.contains("references") || !entry["references"].is_object() || entry["references"].empty()) {
      throw ValidationError(dwhere + ": document '" + doc.doc_id + "' has no references");
    }
    std::set<std::string> names;
    std::map<std::string, std::vector<std::string>> refs;
    for (const auto& [name, file] : entry["references"].items()) {
      if (!file.is_string()) throw ValidationError(dwhere + ": reference '" + name + "' must name a file");
      const fs::path ref_file = base / file.get<std::string>();
      std::vector<std::string> lines = read_text_lines(ref_file);
      if (lines.size() != sources.size()) {
        throw ValidationError(ref_file.string() + ":" + std::to_string(std::min(lines.size(), sources.size()) + 1) +
                              ": reference set '" + name + "' has " + std::to_string(lines.size()) +
                              " lines but source has " + std::to_string(sources.size()));
      }
      names.insert(name);
      refs.emplace(name, std::move(lines));
    }
    if (!ref_names) {
      ref_names = names;
    } else if (*ref_names != names) {
      throw ValidationError(dwhere + ": document '" + doc.doc_id + "' has reference sets {" +
                            util::join({names.begin(), names.end()}, ",") + "} but earlier documents have {" +
                            util::join({ref_names->begin(), ref_names->end()}, ",") + "}");
    }

    for (std::size_t i = 0; i < sources.size(); ++i) {
      Segment seg;
      seg.segment_id = make_segment_id(doc.doc_id, i);
      if (!seen_segments.insert(seg.segment_id).second) {
        throw ValidationError(dwhere + ": duplicate segment id '" + seg.segment_id + "' (doc_id '" + doc.doc_id +
                              "' listed twice)");
      }
      seg.source_text = sources[i];
      for (auto& [name, lines] : refs) seg.references.emplace(name, lines[i]);
      doc.segments.push_back(std::move(seg));
    }

    if (entry.contains("systems")) {
      if (!entry["systems"].is_object()) throw ValidationError(dwhere + ": 'systems' must be an object");
      for (const auto& [system_id, file] : entry["systems"].items()) {
        if (!file.is_string()) throw ValidationError(dwhere + ": system '" + system_id + "' must name a file");
        auto& sf = system_files[system_id];
        sf.system_id = system_id;
        sf.files[doc.doc_id] = base / file.get<std::string>();
      }
    }
    ts.documents.push_back(std::move(doc));
  }
  ts.reference_sets.assign(ref_names->begin(), ref_names->end());

  for (const auto& [system_id, files] : system_files) {
    SystemOutput sys = load_system_output(files, ts.condition, ts);
    if (!sys.resegmented) {
      for (const auto& [doc_id, path] : files.files) {
        std::vector<std::string> head = util::read_lines(path);
        if (!head.empty() && head.front() == kResegmentedHeader) {
          ts.warnings.push_back(path.string() + ": header claims resegmented but line count differs from reference");
        }
      }
    }
    ts.systems.emplace(system_id, std::move(sys));
  }
  return ts;
}

void save_testset(const TestSet& testset, const fs::path& dir) {
  fs::create_directories(dir);
  json manifest;
  manifest["condition"] = {{"task", std::string(to_string(testset.condition.task))},
                           {"langs", testset.condition.langs.str()},
                           {"domain", std::string(to_string(testset.condition.domain))}};
  manifest["documents"] = json::array();
  for (const auto& doc : testset.documents) {
    json entry;
    entry["doc_id"] = doc.doc_id;
    std::vector<std::string> sources;
    for (const auto& s : doc.segments) sources.push_back(s.source_text);
    const std::string source_name = doc.doc_id + ".source.txt";
    write_hypothesis_file(dir / source_name, sources, false);
    entry["source"] = source_name;
    entry["references"] = json::object();
    for (const auto& name : testset.reference_sets) {
      std::vector<std::string> lines;
      for (const auto& s : doc.segments) lines.push_back(s.references.at(name));
      const std::string ref_name = doc.doc_id + ".ref." + name + ".txt";
      write_hypothesis_file(dir / ref_name, lines, false);
      entry["references"][name] = ref_name;
    }
    entry["systems"] = json::object();
    for (const auto& [system_id, sys] : testset.systems) {
      auto it = sys.documents.find(doc.doc_id);
      if (it == sys.documents.end()) continue;
      const std::string hyp_name = doc.doc_id + ".hyp." + system_id + ".txt";
      write_hypothesis_file(dir / hyp_name, it->second, sys.resegmented);
      entry["systems"][system_id] = hyp_name;
    }
    manifest["documents"].push_back(std::move(entry));
  }
  util::write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

}  // namespace steval::evalset
