#pragma once

#include <compare>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace steval::evalset {

enum class Task { Offline, Multilingual, Simultaneous };
enum class Domain { TED, ACL };

std::string_view to_string(Task task);
std::string_view to_string(Domain domain);
Task parse_task(std::string_view name);
Domain parse_domain(std::string_view name);

struct LanguagePair {
  std::string source;
  std::string target;

  std::string str() const { return source + "-" + target; }
  static LanguagePair parse(std::string_view text);  // "en-de"
  auto operator<=>(const LanguagePair&) const = default;
};

/// (task, language pair, domain). Only the dataset's task/domain pairings
/// are valid: TED with offline or simultaneous, ACL with offline or
/// multilingual.
struct Condition {
  Task task = Task::Offline;
  LanguagePair langs;
  Domain domain = Domain::TED;

  std::string str() const;  // "offline/en-de/TED"
  void validate() const;
  auto operator<=>(const Condition&) const = default;
};

Condition make_condition(std::string_view task, std::string_view langs, std::string_view domain);

struct Segment {
  std::string segment_id;  // "{doc_id}:{index}"
  std::string source_text;
  std::map<std::string, std::string> references;  // reference-set name -> text
  bool operator==(const Segment&) const = default;
};

struct Document {
  std::string doc_id;
  std::vector<Segment> segments;
  bool operator==(const Document&) const = default;
};

std::string make_segment_id(std::string_view doc_id, std::size_t index);
/// Splits "{doc_id}:{index}" at the last colon.
std::pair<std::string, std::size_t> parse_segment_id(std::string_view segment_id);

struct SystemOutput {
  std::string system_id;
  Condition condition;
  std::map<std::string, std::vector<std::string>> documents;  // doc_id -> hypothesis lines
  bool resegmented = false;
  bool operator==(const SystemOutput&) const = default;
};

/// All talks of one condition with their registered system outputs.
struct TestSet {
  Condition condition;
  std::vector<Document> documents;
  std::vector<std::string> reference_sets;
  std::map<std::string, SystemOutput> systems;
  std::vector<std::string> warnings;

  const Document* find_document(std::string_view doc_id) const;
  const Document& document(std::string_view doc_id) const;
  std::size_t segment_count() const;
  bool has_segment(std::string_view segment_id) const;
  /// Segment ids in canonical (document, index) order.
  std::vector<std::string> segment_ids() const;

  bool operator==(const TestSet& other) const {
    return condition == other.condition && documents == other.documents && reference_sets == other.reference_sets &&
           systems == other.systems;
  }
};

/// Per-document hypothesis files of one system.
struct SystemFiles {
  std::string system_id;
  std::map<std::string, std::filesystem::path> files;  // doc_id -> path
};

/// First line of a hypothesis file that declares it already parallel to the references.
inline constexpr std::string_view kResegmentedHeader = "##steval resegmented=true";

/// Loads a manifest file, or `<dir>/manifest.json` when given a directory.
TestSet load_testset(const std::filesystem::path& path);
void save_testset(const TestSet& testset, const std::filesystem::path& dir);

SystemOutput load_system_output(const SystemFiles& files, const Condition& condition, const TestSet& testset);
void write_hypothesis_file(const std::filesystem::path& path, const std::vector<std::string>& lines, bool resegmented);

std::filesystem::path manifest_path(const std::filesystem::path& path);

}  // namespace steval::evalset
