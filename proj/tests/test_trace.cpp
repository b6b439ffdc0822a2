#include <sstream>

#include <catch2/catch_amalgamated.hpp>

#include "tokisim/trace.hpp"
#include "tokisim/workloads.hpp"

using namespace tokisim;

namespace {

TraceEvent ev(Cycles t, std::uint32_t core, TraceKind k, std::string task = "",
              std::uint64_t a0 = 0, std::uint64_t a1 = 0) {
  return TraceEvent{t, core, k, std::move(task), a0, a1};
}

}  // namespace

TEST_CASE("emit: full buffer drops the newest and counts it") {
  TraceBuffer buf(2);
  CHECK(buf.emit(ev(1, 0, TraceKind::JobRelease)) == TraceBuffer::Emit::Accepted);
  CHECK(buf.emit(ev(2, 0, TraceKind::JobRelease)) == TraceBuffer::Emit::Accepted);
  CHECK(buf.emit(ev(3, 0, TraceKind::JobRelease)) == TraceBuffer::Emit::Dropped);
  CHECK(buf.events().size() == 2);
  CHECK(buf.dropped() == 1);
  CHECK(buf.emitted() == 3);
  CHECK(buf.events()[0].time == 1);  // order preserved, oldest kept
}

TEST_CASE("emit: zero capacity drops everything") {
  TraceBuffer buf(0);
  for (int i = 0; i < 5; ++i) buf.emit(ev(i, 0, TraceKind::JobRelease));
  CHECK(buf.events().empty());
  CHECK(buf.dropped() == 5);
}

TEST_CASE("merge: time ties break by core") {
  std::vector<TraceBuffer> bufs;
  bufs.emplace_back(16);
  bufs.emplace_back(16);
  bufs[1].emit(ev(5, 1, TraceKind::JobRelease, "b"));
  bufs[0].emit(ev(5, 0, TraceKind::JobRelease, "a"));
  auto merged = merge_buffers(bufs);
  REQUIRE(merged.size() == 2);
  CHECK(merged[0].core == 0);
  CHECK(merged[1].core == 1);
}

TEST_CASE("export: empty trace is a valid header-only file") {
  std::ostringstream os;
  CHECK(export_trace({}, os) == 0);
  CHECK(os.str() == "tokisim-trace v1\n");
}

TEST_CASE("export format is exact") {
  std::ostringstream os;
  export_trace({ev(42, 1, TraceKind::IrqEnter, "isr", 40, 0)}, os);
  CHECK(os.str() == "tokisim-trace v1\n42,1,IRQ_ENTER,isr,40,0\n");
}

TEST_CASE("export conservation under drops") {
  TraceBuffer buf(10);
  for (int i = 0; i < 25; ++i) buf.emit(ev(i, 0, TraceKind::JobRelease, "t"));
  std::vector<TraceBuffer> bufs;
  bufs.push_back(buf);
  std::ostringstream os;
  std::uint64_t written = export_trace(merge_buffers(bufs), os);
  CHECK(written == 10);
  CHECK(buf.emitted() == written + buf.dropped());
}

TEST_CASE("parse inverts export and re-export is byte-identical") {
  Lcg rng(3);
  std::vector<TraceEvent> events;
  Cycles t = 0;
  for (int i = 0; i < 200; ++i) {
    t += rng.below(100);
    events.push_back(ev(t, static_cast<std::uint32_t>(rng.below(4)),
                        static_cast<TraceKind>(rng.below(15)),
                        rng.below(2) ? "task" + std::to_string(rng.below(3)) : "",
                        rng.below(1000), rng.below(1000)));
  }
  std::ostringstream os;
  export_trace(events, os);
  std::istringstream is(os.str());
  auto parsed = parse_trace(is);
  REQUIRE(parsed == events);
  std::ostringstream os2;
  export_trace(parsed, os2);
  CHECK(os2.str() == os.str());
}

TEST_CASE("parse reports the offending line number") {
  std::istringstream is("tokisim-trace v1\n1,0,JOB_RELEASE,a,0,0\nnot-an-event\n");
  try {
    parse_trace(is);
    FAIL("expected TraceParseError");
  } catch (const TraceParseError& e) {
    CHECK(e.line == 3);
  }
  std::istringstream bad_header("nope\n");
  CHECK_THROWS_AS(parse_trace(bad_header), TraceParseError);
  std::istringstream bad_kind("tokisim-trace v1\n1,0,NOT_A_KIND,a,0,0\n");
  CHECK_THROWS_AS(parse_trace(bad_kind), TraceParseError);
}
