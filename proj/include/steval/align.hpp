#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "steval/textproc.hpp"

namespace steval::evalset {
struct Document;
struct SystemOutput;
struct TestSet;
}  // namespace steval::evalset

namespace steval::align {

/// Levenshtein distance with unit insert/delete/substitute costs.
/// Throws ValidationError when the streams' levels differ.
std::size_t edit_distance(const text::TokenStream& a, const text::TokenStream& b);

/// edit_distance(hyp, ref) / |ref|. Throws ValidationError for an empty reference.
double wer(const text::TokenStream& hyp, const text::TokenStream& ref);

enum class MemoryMode {
  Auto,          ///< full matrix up to `full_matrix_cell_limit` cells, linear memory above
  FullMatrix,
  LinearMemory,
};

struct ResegmentOptions {
  MemoryMode mode = MemoryMode::Auto;
  std::size_t full_matrix_cell_limit = 40'000'000;
  /// Cells per leaf block in linear-memory mode.
  std::size_t linear_leaf_cells = 1u << 22;
  /// Half-width of a diagonal band; disables exactness when set.
  std::optional<std::size_t> band;
};

/// Monotone cut of a hypothesis stream into one span per reference segment.
struct Segmentation {
  /// K+1 offsets into the hypothesis: 0 = b0 <= b1 <= ... <= bK = |H|.
  std::vector<std::size_t> cut_points;
  std::size_t total_distance = 0;
  /// Set when a band restricted the search; total_distance is then the true
  /// cost at the returned cuts, which may exceed the optimum.
  bool approximate = false;

  std::size_t segment_count() const { return cut_points.empty() ? 0 : cut_points.size() - 1; }
};

/// Cuts `hyp` into refs.size() segments minimizing the summed edit distance
/// to the reference segments.
///
/// Runs one Levenshtein alignment of `hyp` against the concatenated
/// references and reads each cut off the backtrace where the path crosses
/// a reference boundary. Backtrace preference is diagonal, then hypothesis
/// token alone, then reference token alone; hypothesis tokens left unaligned
/// exactly at a boundary go to the earlier segment. Both memory modes
/// produce identical cuts.
Segmentation resegment(const text::TokenStream& hyp, std::span<const text::TokenStream> refs,
                       const ResegmentOptions& options = {});

std::vector<text::TokenStream> apply_segmentation(const text::TokenStream& hyp, const Segmentation& seg);

struct DocumentAlignment {
  std::string doc_id;
  std::vector<std::string> segments;
  std::size_t distance = 0;
  std::size_t ref_tokens = 0;
  bool approximate = false;

  double wer() const { return ref_tokens ? static_cast<double>(distance) / static_cast<double>(ref_tokens) : 0.0; }
};

/// Resegments hypothesis lines of one talk onto the reference segmentation of
/// `ref_doc` (reference set `reference_set`).
DocumentAlignment resegment_document(std::span<const std::string> hyp_lines, const evalset::Document& ref_doc,
                                     const std::string& reference_set, text::TokenizationLevel level,
                                     const ResegmentOptions& options = {});

/// Resegments the single talk `ref_doc` of `sys`; the result holds only that
/// document and is flagged resegmented. Throws ValidationError if `sys` has no
/// output for the talk.
evalset::SystemOutput resegment_system_output(const evalset::SystemOutput& sys, const evalset::Document& ref_doc,
                                              const std::string& reference_set, text::TokenizationLevel level,
                                              const ResegmentOptions& options = {});

/// Resegments every talk of `sys` against `testset`. Per-talk alignment
/// statistics are appended to `report` when given.
evalset::SystemOutput resegment_all(const evalset::SystemOutput& sys, const evalset::TestSet& testset,
                                    const std::string& reference_set, text::TokenizationLevel level,
                                    const ResegmentOptions& options = {},
                                    std::vector<DocumentAlignment>* report = nullptr);

}  // namespace steval::align
