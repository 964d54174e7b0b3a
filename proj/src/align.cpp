#include "steval/align.hpp"

#include <algorithm>
#include <limits>
#include <unordered_map>

#include "steval/error.hpp"
#include "steval/evalset.hpp"

namespace steval::align {

namespace {

using Cost = std::uint32_t;
constexpr Cost kInf = Cost{1} << 30;

enum Move : std::uint8_t { kDiag = 0, kUp = 1, kLeft = 2 };

void require_same_level(const text::TokenStream& a, const text::TokenStream& b) {
  if (a.level != b.level) throw ValidationError("mixed tokenization levels in alignment");
}

class Vocabulary {
 public:
  std::vector<std::uint32_t> encode(const std::vector<std::string>& tokens) {
    std::vector<std::uint32_t> ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens) {
      auto [it, inserted] = ids_.try_emplace(t, static_cast<std::uint32_t>(ids_.size()));
      ids.push_back(it->second);
    }
    return ids;
  }

 private:
  std::unordered_map<std::string, std::uint32_t> ids_;
};

// Hypothesis tokens index rows (i), concatenated reference tokens index
// columns (j). Every cell stores the first optimal predecessor in the order
// diagonal, up, left; the backtrace follows those choices from (n, m).
class BoundaryAligner {
 public:
  BoundaryAligner(const std::vector<std::uint32_t>& hyp, const std::vector<std::uint32_t>& ref,
                  std::optional<std::size_t> band, std::size_t leaf_cells)
      : hyp_(hyp), ref_(ref), n_(hyp.size()), m_(ref.size()), leaf_cells_(leaf_cells), max_row_at_col_(m_ + 1, 0) {
    if (band && n_ > 0) {
      std::size_t slope = (m_ + n_ - 1) / n_;
      half_width_ = std::max(*band, slope + 1);
    }
  }

  void run() {
    std::vector<Cost> row0(m_ + 1);
    auto [lo, hi] = columns(0);
    for (std::size_t j = 0; j <= m_; ++j) row0[j] = (j >= lo && j <= hi) ? static_cast<Cost>(j) : kInf;
    if (n_ == 0) {
      total_ = row0[m_];
      return;
    }
    solve(0, std::move(row0), n_, m_);
  }

  std::size_t total() const { return total_; }
  const std::vector<std::size_t>& max_row_at_col() const { return max_row_at_col_; }

 private:
  std::pair<std::size_t, std::size_t> columns(std::size_t i) const {
    if (!half_width_) return {0, m_};
    // center of the (0,0)-(n,m) diagonal at row i, rounded
    std::size_t center = n_ == 0 ? 0 : (i * m_ * 2 + n_) / (2 * n_);
    std::size_t lo = center > *half_width_ ? center - *half_width_ : 0;
    std::size_t hi = std::min(m_, center + *half_width_);
    return {lo, hi};
  }

  void step_row(std::size_t i, const Cost* prev, Cost* cur, std::size_t ncols, std::uint8_t* choice) const {
    auto [lo, hi] = columns(i);
    const std::uint32_t token = hyp_[i - 1];
    for (std::size_t j = 0; j < ncols; ++j) {
      if (j < lo || j > hi) {
        cur[j] = kInf;
        if (choice) choice[j] = kUp;
        continue;
      }
      if (j == 0) {
        cur[0] = prev[0] + 1;
        if (choice) choice[0] = kUp;
        continue;
      }
      Cost best = prev[j - 1] + (token == ref_[j - 1] ? 0 : 1);
      std::uint8_t move = kDiag;
      if (Cost up = prev[j] + 1; up < best) {
        best = up;
        move = kUp;
      }
      if (Cost left = cur[j - 1] + 1; left < best) {
        best = left;
        move = kLeft;
      }
      cur[j] = std::min(best, kInf);
      if (choice) choice[j] = move;
    }
  }

  void record(std::size_t i, std::size_t j) { max_row_at_col_[j] = std::max(max_row_at_col_[j], i); }

  // Traces the optimal path backwards from (r1, end_col) until it reaches
  // row r0, whose costs are `row0`. Returns the column where it arrives.
  std::size_t solve(std::size_t r0, std::vector<Cost> row0, std::size_t r1, std::size_t end_col) {
    const std::size_t ncols = end_col + 1;
    const std::size_t rows = r1 - r0;
    row0.resize(ncols);
    if (rows == 1 || rows * ncols <= leaf_cells_) return solve_leaf(r0, row0, r1, end_col);

    const std::size_t mid = r0 + rows / 2;
    std::vector<Cost> prev = row0;
    std::vector<Cost> cur(ncols);
    for (std::size_t i = r0 + 1; i <= mid; ++i) {
      step_row(i, prev.data(), cur.data(), ncols, nullptr);
      std::swap(prev, cur);
    }
    std::size_t arrival = solve(mid, std::move(prev), r1, end_col);
    return solve(r0, std::move(row0), mid, arrival);
  }

  std::size_t solve_leaf(std::size_t r0, const std::vector<Cost>& row0, std::size_t r1, std::size_t end_col) {
    const std::size_t ncols = end_col + 1;
    const std::size_t rows = r1 - r0;
    std::vector<std::uint8_t> choices(rows * ncols);
    std::vector<Cost> prev = row0;
    std::vector<Cost> cur(ncols);
    for (std::size_t i = r0 + 1; i <= r1; ++i) {
      step_row(i, prev.data(), cur.data(), ncols, &choices[(i - r0 - 1) * ncols]);
      std::swap(prev, cur);
    }
    if (r1 == n_ && end_col == m_) total_ = prev[end_col];

    std::size_t i = r1;
    std::size_t j = end_col;
    while (i > r0) {
      record(i, j);
      switch (choices[(i - r0 - 1) * ncols + j]) {
        case kDiag:
          --i;
          --j;
          break;
        case kUp:
          --i;
          break;
        default:
          --j;
          break;
      }
    }
    record(r0, j);
    return j;
  }

  const std::vector<std::uint32_t>& hyp_;
  const std::vector<std::uint32_t>& ref_;
  std::size_t n_;
  std::size_t m_;
  std::size_t leaf_cells_;
  std::optional<std::size_t> half_width_;
  std::vector<std::size_t> max_row_at_col_;
  std::size_t total_ = 0;
};

}  // namespace

std::size_t edit_distance(const text::TokenStream& a, const text::TokenStream& b) {
  require_same_level(a, b);
  const auto& x = a.tokens;
  const auto& y = b.tokens;
  std::vector<std::size_t> prev(y.size() + 1);
  std::vector<std::size_t> cur(y.size() + 1);
  for (std::size_t j = 0; j <= y.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= x.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= y.size(); ++j) {
      cur[j] = std::min({prev[j - 1] + (x[i - 1] == y[j - 1] ? 0 : 1), prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[y.size()];
}

double wer(const text::TokenStream& hyp, const text::TokenStream& ref) {
  if (ref.empty()) throw ValidationError("WER undefined for an empty reference");
  return static_cast<double>(edit_distance(hyp, ref)) / static_cast<double>(ref.size());
}

Segmentation resegment(const text::TokenStream& hyp, std::span<const text::TokenStream> refs,
                       const ResegmentOptions& options) {
  if (refs.empty()) throw ValidationError("resegment: reference segment list is empty");
  for (const auto& r : refs) require_same_level(hyp, r);

  text::ConcatResult joined = text::concat_streams(refs);
  Vocabulary vocab;
  std::vector<std::uint32_t> h = vocab.encode(hyp.tokens);
  std::vector<std::uint32_t> r = vocab.encode(joined.stream.tokens);

  const std::size_t cells = (h.size() + 1) * (r.size() + 1);
  bool full = options.mode == MemoryMode::FullMatrix ||
              (options.mode == MemoryMode::Auto && cells <= options.full_matrix_cell_limit);
  std::size_t leaf = full ? std::numeric_limits<std::size_t>::max() : std::max<std::size_t>(options.linear_leaf_cells, 1);

  BoundaryAligner aligner(h, r, options.band, leaf);
  aligner.run();

  Segmentation seg;
  seg.total_distance = aligner.total();
  seg.approximate = options.band.has_value();
  const auto& max_row = aligner.max_row_at_col();
  seg.cut_points.reserve(refs.size() + 1);
  seg.cut_points.push_back(0);
  for (std::size_t k = 1; k < refs.size(); ++k) seg.cut_points.push_back(max_row[joined.offsets[k]]);
  seg.cut_points.push_back(h.size());
  if (seg.approximate) {
    // The banded path cost overstates the cuts' true cost; report the latter.
    seg.total_distance = 0;
    for (std::size_t k = 0; k < refs.size(); ++k) {
      text::TokenStream piece{{hyp.tokens.begin() + static_cast<std::ptrdiff_t>(seg.cut_points[k]),
                               hyp.tokens.begin() + static_cast<std::ptrdiff_t>(seg.cut_points[k + 1])},
                              hyp.level};
      seg.total_distance += edit_distance(piece, refs[k]);
    }
  }
  return seg;
}

std::vector<text::TokenStream> apply_segmentation(const text::TokenStream& hyp, const Segmentation& seg) {
  std::vector<text::TokenStream> out;
  out.reserve(seg.segment_count());
  for (std::size_t k = 0; k + 1 < seg.cut_points.size(); ++k) {
    text::TokenStream s{{}, hyp.level};
    s.tokens.assign(hyp.tokens.begin() + static_cast<std::ptrdiff_t>(seg.cut_points[k]),
                    hyp.tokens.begin() + static_cast<std::ptrdiff_t>(seg.cut_points[k + 1]));
    out.push_back(std::move(s));
  }
  return out;
}

DocumentAlignment resegment_document(std::span<const std::string> hyp_lines, const evalset::Document& ref_doc,
                                     const std::string& reference_set, text::TokenizationLevel level,
                                     const ResegmentOptions& options) {
  std::vector<text::TokenStream> hyp_parts;
  hyp_parts.reserve(hyp_lines.size());
  for (const auto& line : hyp_lines) hyp_parts.push_back(text::tokenize(line, level));
  text::TokenStream hyp = text::concat_streams(hyp_parts).stream;
  hyp.level = level;

  std::vector<text::TokenStream> refs;
  refs.reserve(ref_doc.segments.size());
  for (const auto& segment : ref_doc.segments) {
    auto it = segment.references.find(reference_set);
    if (it == segment.references.end()) {
      throw ValidationError("segment " + segment.segment_id + " has no reference set '" + reference_set + "'");
    }
    refs.push_back(text::tokenize(it->second, level));
  }

  Segmentation seg = resegment(hyp, refs, options);
  DocumentAlignment result;
  result.doc_id = ref_doc.doc_id;
  result.distance = seg.total_distance;
  result.approximate = seg.approximate;
  for (const auto& r : refs) result.ref_tokens += r.size();
  for (const auto& part : apply_segmentation(hyp, seg)) result.segments.push_back(text::join_tokens(part));
  return result;
}

evalset::SystemOutput resegment_system_output(const evalset::SystemOutput& sys, const evalset::Document& ref_doc,
                                              const std::string& reference_set, text::TokenizationLevel level,
                                              const ResegmentOptions& options) {
  auto it = sys.documents.find(ref_doc.doc_id);
  if (it == sys.documents.end()) {
    throw ValidationError("system '" + sys.system_id + "' has no output for document '" + ref_doc.doc_id + "'");
  }
  DocumentAlignment aligned = resegment_document(it->second, ref_doc, reference_set, level, options);
  evalset::SystemOutput out;
  out.system_id = sys.system_id;
  out.condition = sys.condition;
  out.documents.emplace(ref_doc.doc_id, std::move(aligned.segments));
  out.resegmented = true;
  return out;
}

evalset::SystemOutput resegment_all(const evalset::SystemOutput& sys, const evalset::TestSet& testset,
                                    const std::string& reference_set, text::TokenizationLevel level,
                                    const ResegmentOptions& options, std::vector<DocumentAlignment>* report) {
  evalset::SystemOutput out;
  out.system_id = sys.system_id;
  out.condition = sys.condition;
  for (const auto& [doc_id, lines] : sys.documents) {
    const evalset::Document& doc = testset.document(doc_id);
    DocumentAlignment aligned = resegment_document(lines, doc, reference_set, level, options);
    out.documents.emplace(doc_id, aligned.segments);
    if (report) report->push_back(std::move(aligned));
  }
  out.resegmented = true;
  return out;
}

}  // namespace steval::align
