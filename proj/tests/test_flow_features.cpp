#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "fedsec/errors.hpp"
#include "fedsec/flow_features.hpp"

using namespace fedsec;
namespace fs = std::filesystem;

namespace {

const fs::path kFlows = fs::path(FEDSEC_TEST_DATA_DIR) / "flows";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string render(const std::string& fixture) {
  const auto flows = read_flow_records(kFlows / (fixture + ".jsonl"));
  const auto table = DeviceTable::read_csv(kFlows / "devices.csv");
  const auto streams = label_stream(flows, table);
  std::ostringstream out;
  write_feature_header(out);
  for (const auto& [id, fs] : streams.by_device) write_feature_rows(out, extract_features(fs, kDefaultMaxPeriod, id));
  return out.str();
}

FlowRecord flow(double start, double end, int port, std::string dst, std::uint64_t bytes = 10,
                std::uint64_t packets = 1) {
  FlowRecord f;
  f.device_mac = "aa:bb:cc:dd:ee:ff";
  f.src_addr = "192.168.1.2";
  f.dst_addr = std::move(dst);
  f.dst_port = port;
  f.protocol = 6;
  f.start_time = start;
  f.end_time = end;
  f.bytes = bytes;
  f.packets = packets;
  return f;
}

}  // namespace

TEST_CASE("golden fixtures") {
  for (const char* name : {"single_flow_window", "multi_protocol_same_server", "dns_only"}) {
    CAPTURE(name);
    CHECK(render(name) == slurp(kFlows / (std::string(name) + ".csv")));
  }
}

TEST_CASE("two-flow window arithmetic") {
  std::vector<FlowRecord> fs{flow(0, 30, 80, "a", 100, 4), flow(600, 601, 80, "a", 0, 0)};
  const auto rows = extract_features(fs, 600, 2);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].avg_packet_size == 25.0);
  CHECK(rows[0].total_sleep_time == 570.0);
  CHECK(rows[0].total_active_time == 31.0);
  CHECK(rows[0].device_id == 2);
}

TEST_CASE("sets reset per window and overlaps clamp to zero") {
  std::vector<FlowRecord> fs{
      flow(0, 100, 80, "a"), flow(50, 700, 443, "b"),    // window 1, overlap
      flow(800, 900, 80, "a"), flow(950, 1500, 80, "a"),  // window 2
  };
  const auto rows = extract_features(fs, 600, 0);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].total_sleep_time == 0.0);
  CHECK(rows[0].number_of_servers == 2);
  CHECK(rows[0].number_of_protocols == 2);
  CHECK(rows[1].number_of_servers == 1);
  CHECK(rows[1].number_of_protocols == 1);
  CHECK(rows[1].total_sleep_time == 50.0);
  // Conservation: active + sleep never exceeds the covered span.
  for (const auto& r : rows) CHECK(r.total_active_time + r.total_sleep_time <= 1500.0);
}

TEST_CASE("trailing partial window is dropped") {
  std::vector<FlowRecord> fs{flow(0, 10, 80, "a"), flow(20, 30, 80, "a")};
  CHECK(extract_features(fs, 600, 0).empty());
}

TEST_CASE("zero-volume window has guarded rates") {
  std::vector<FlowRecord> fs{flow(0, 0, 80, "a", 0, 0), flow(600, 600, 80, "a", 0, 0)};
  const auto rows = extract_features(fs, 600, 0);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].flow_rate == 0.0);
  CHECK(rows[0].avg_packet_size == 0.0);
}

TEST_CASE("unsorted input is rejected") {
  std::vector<FlowRecord> fs{flow(10, 20, 80, "a"), flow(5, 30, 80, "a")};
  CHECK_THROWS_AS(extract_features(fs, 600, 0), SequencingError);
}

TEST_CASE("record parsing") {
  const auto ok = nlohmann::json::parse(
      R"({"device_mac":"AA:BB:CC:DD:EE:FF","src_addr":"1","dst_addr":"2","dst_port":53,"protocol":17,)"
      R"("start_time":1,"end_time":2,"bytes":5,"packets":1,"dns_query":"x.org"})");
  const auto f = parse_flow_record(ok);
  CHECK(f.dns_query == std::optional<std::string>("x.org"));
  CHECK(to_json(f)["dst_port"] == 53);
  CHECK(parse_flow_record(to_json(f)).bytes == 5);

  auto missing = ok;
  missing.erase("bytes");
  CHECK_THROWS_AS(parse_flow_record(missing), ParseError);
  auto reversed = ok;
  reversed["end_time"] = 0.5;
  CHECK_THROWS_AS(parse_flow_record(reversed), ParseError);
  auto no_packets = ok;
  no_packets["packets"] = 0;
  CHECK_THROWS_AS(parse_flow_record(no_packets), ParseError);

  std::istringstream lines("{\"device_mac\":1}\n");
  CHECK_THROWS_AS(read_flow_records(lines), ParseError);
}

TEST_CASE("joy adapter") {
  const auto j = nlohmann::json::parse(
      R"({"sa":"10.0.0.2","da":"8.8.8.8","dp":53,"pr":17,"time_start":3.0,"time_end":3.5,)"
      R"("bytes_out":40,"bytes_in":60,"num_pkts_out":1,"num_pkts_in":1,"dns":[{"qn":"a.com"}]})");
  const auto f = flow_from_joy(j, "AA:bb:CC:dd:EE:ff");
  CHECK(f.bytes == 100);
  CHECK(f.packets == 2);
  CHECK(f.dns_query == std::optional<std::string>("a.com"));
  CHECK(f.device_mac == "aa:bb:cc:dd:ee:ff");
}

TEST_CASE("device table") {
  const auto t = DeviceTable::iot_testbed();
  CHECK(t.size() == 28);
  CHECK_NOTHROW(t.validate());
  std::istringstream bad("mac,name,device_id\naa:aa:aa:aa:aa:aa,x,0\nbb:bb:bb:bb:bb:bb,y,2\n");
  CHECK_THROWS(DeviceTable::read_csv(bad).validate());

  std::vector<FlowRecord> fs{flow(0, 1, 80, "a")};
  fs[0].device_mac = "00:00:00:00:00:01";
  const auto s = label_stream(fs, t);
  CHECK(s.dropped == 1);
  CHECK(s.by_device.empty());
}
