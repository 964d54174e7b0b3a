#include <gtest/gtest.h>

#include "steval/align.hpp"
#include "steval/error.hpp"
#include "steval/evalset.hpp"
#include "steval/util.hpp"
#include "test_util.hpp"

using namespace steval;
using testutil::fixture;

namespace {

std::string error_of(const std::filesystem::path& manifest) {
  try {
    evalset::load_testset(manifest);
  } catch (const ValidationError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Condition, ParseAndPrint) {
  auto c = evalset::make_condition("offline", "en-de", "TED");
  EXPECT_EQ(c.str(), "offline/en-de/TED");
  EXPECT_EQ(evalset::make_condition("multilingual", "en-ja", "ACL").str(), "multilingual/en-ja/ACL");
  EXPECT_EQ(evalset::make_condition("simultaneous", "en-zh", "TED").langs.target, "zh");
}

TEST(Condition, OnlyDatasetPairingsAreValid) {
  EXPECT_THROW(evalset::make_condition("simultaneous", "en-de", "ACL"), ValidationError);
  EXPECT_THROW(evalset::make_condition("multilingual", "en-de", "TED"), ValidationError);
  EXPECT_THROW(evalset::make_condition("offline", "ende", "TED"), ValidationError);
  EXPECT_THROW(evalset::make_condition("batch", "en-de", "TED"), ValidationError);
}

TEST(SegmentId, SplitsAtLastColon) {
  EXPECT_EQ(evalset::make_segment_id("talk:7", 3), "talk:7:3");
  auto [doc, index] = evalset::parse_segment_id("talk:7:3");
  EXPECT_EQ(doc, "talk:7");
  EXPECT_EQ(index, 3u);
  EXPECT_THROW(evalset::parse_segment_id("nocolon"), ValidationError);
  EXPECT_THROW(evalset::parse_segment_id("doc:x"), ValidationError);
}

TEST(LoadTestSet, MiniFixture) {
  auto ts = evalset::load_testset(fixture("mini"));
  EXPECT_EQ(ts.condition.str(), "offline/en-de/TED");
  ASSERT_EQ(ts.documents.size(), 2u);
  EXPECT_EQ(ts.segment_count(), 50u);
  EXPECT_EQ(ts.reference_sets, (std::vector<std::string>{"new", "original"}));
  EXPECT_EQ(ts.systems.size(), 3u);
  for (const auto& [id, sys] : ts.systems) EXPECT_FALSE(sys.resegmented) << id;
  auto ids = ts.segment_ids();
  ASSERT_EQ(ids.size(), 50u);
  EXPECT_EQ(ids.front(), "ted_1001:0");
  EXPECT_EQ(ids.back(), "ted_1002:19");
  EXPECT_TRUE(ts.has_segment("ted_1002:19"));
  EXPECT_FALSE(ts.has_segment("ted_1002:20"));
  EXPECT_FALSE(ts.has_segment("ted_9999:0"));
  for (const auto& doc : ts.documents) {
    for (const auto& seg : doc.segments) EXPECT_EQ(seg.references.size(), 2u);
  }
  EXPECT_THROW(ts.document("nope"), ValidationError);
}

TEST(LoadTestSet, DuplicateDocumentRejected) {
  EXPECT_NE(error_of(fixture("bad_duplicate_doc")).find("duplicate segment id"), std::string::npos);
}

TEST(LoadTestSet, MissingReferenceSetRejected) {
  auto msg = error_of(fixture("bad_missing_refset"));
  EXPECT_NE(msg.find("ted_1002"), std::string::npos) << msg;
  EXPECT_NE(msg.find("reference sets"), std::string::npos) << msg;
}

TEST(LoadTestSet, LineCountMismatchNamesFile) {
  auto msg = error_of(fixture("bad_line_count"));
  EXPECT_NE(msg.find("short.ref.txt:20"), std::string::npos) << msg;
}

TEST(LoadTestSet, MissingFileIsIoError) {
  EXPECT_THROW(evalset::load_testset(testutil::scratch() / "absent.json"), IoError);
}

TEST(LoadTestSet, MalformedJsonIsValidationError) {
  auto dir = testutil::scratch();
  util::write_file(dir / "manifest.json", "{not json");
  EXPECT_THROW(evalset::load_testset(dir), ValidationError);
}

TEST(SystemOutput, HeaderAndCountsDecideResegmented) {
  auto ts = evalset::load_testset(fixture("mini"));
  auto dir = testutil::scratch();
  const auto& d0 = ts.documents[0];
  const auto& d1 = ts.documents[1];
  std::vector<std::string> l0;
  std::vector<std::string> l1;
  for (const auto& s : d0.segments) l0.push_back(s.references.at("new"));
  for (const auto& s : d1.segments) l1.push_back(s.references.at("new"));

  evalset::write_hypothesis_file(dir / "a0", l0, true);
  evalset::write_hypothesis_file(dir / "a1", l1, true);
  evalset::SystemFiles files{"s", {{d0.doc_id, dir / "a0"}, {d1.doc_id, dir / "a1"}}};
  auto sys = evalset::load_system_output(files, ts.condition, ts);
  EXPECT_TRUE(sys.resegmented);
  EXPECT_EQ(sys.documents.at(d0.doc_id), l0);

  evalset::write_hypothesis_file(dir / "a1", l1, false);
  EXPECT_FALSE(evalset::load_system_output(files, ts.condition, ts).resegmented);

  l1.pop_back();
  evalset::write_hypothesis_file(dir / "a1", l1, true);
  EXPECT_FALSE(evalset::load_system_output(files, ts.condition, ts).resegmented);
}

TEST(SystemOutput, UnknownDocumentAndEmptyFileRejected) {
  auto ts = evalset::load_testset(fixture("mini"));
  auto dir = testutil::scratch();
  util::write_file(dir / "h", "x\n");
  EXPECT_THROW(evalset::load_system_output({"s", {{"ted_9999", dir / "h"}}}, ts.condition, ts), ValidationError);
  util::write_file(dir / "empty", "");
  EXPECT_THROW(evalset::load_system_output({"s", {{"ted_1001", dir / "empty"}}}, ts.condition, ts), ValidationError);
}

TEST(SaveTestSet, RoundTripsAfterResegmentation) {
  auto ts = evalset::load_testset(fixture("mini"));
  for (auto& [id, sys] : ts.systems) sys = align::resegment_all(sys, ts, "new", text::TokenizationLevel::Word);
  auto dir = testutil::scratch();
  evalset::save_testset(ts, dir);
  auto back = evalset::load_testset(dir);
  EXPECT_EQ(back, ts);
  EXPECT_TRUE(back.warnings.empty());
  for (const auto& [id, sys] : back.systems) EXPECT_TRUE(sys.resegmented);
}

TEST(SaveTestSet, FalseHeaderClaimWarns) {
  auto ts = evalset::load_testset(fixture("mini"));
  auto dir = testutil::scratch();
  evalset::save_testset(ts, dir);
  auto path = dir / "ted_1001.hyp.sys_a.txt";
  auto lines = util::read_lines(path);
  evalset::write_hypothesis_file(path, lines, true);
  auto back = evalset::load_testset(dir);
  EXPECT_FALSE(back.systems.at("sys_a").resegmented);
  ASSERT_EQ(back.warnings.size(), 1u);
  EXPECT_NE(back.warnings[0].find("ted_1001.hyp.sys_a.txt"), std::string::npos);
}
