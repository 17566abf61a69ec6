#pragma once

// Per-device behavioral features over fixed time windows, computed from
// summarized network flow records.

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace fedsec {

struct FlowRecord {
  std::string device_mac;
  std::string src_addr;
  std::string dst_addr;
  int dst_port = 0;
  int protocol = 0;
  double start_time = 0.0;
  double end_time = 0.0;
  std::uint64_t bytes = 0;
  std::uint64_t packets = 0;
  std::optional<std::string> dns_query;
};

struct FeatureRow {
  double total_sleep_time = 0.0;
  double total_active_time = 0.0;
  std::uint64_t total_flow_volume = 0;
  double flow_rate = 0.0;
  double avg_packet_size = 0.0;
  int number_of_servers = 0;
  int number_of_protocols = 0;
  int number_of_unique_dns = 0;
  double dns_interval = 0.0;
  double ntp_interval = 0.0;
  int device_id = 0;
};

inline constexpr std::array<std::string_view, 10> kFeatureColumns{
    "totalSleepTime",    "totalActiveTime",   "totalFlowVolume", "flowRate",
    "avgPacketSize",     "numberOfServers",   "numberOfProtocols",
    "numberOfUniqueDNS", "DNSinterval",       "NTPinterval"};

inline constexpr double kDefaultMaxPeriod = 600.0;
inline constexpr int kDnsPort = 53;
inline constexpr int kNtpPort = 123;

struct DeviceInfo {
  std::string name;
  int device_id = 0;
};

// MAC -> device. MACs are stored lower-case; ids must be contiguous from 0.
class DeviceTable {
 public:
  void add(std::string_view mac, std::string name, int device_id);
  const DeviceInfo* find(std::string_view mac) const;
  std::size_t size() const { return by_mac_.size(); }
  bool empty() const { return by_mac_.empty(); }
  const std::map<std::string, DeviceInfo>& entries() const { return by_mac_; }

  // Throws if ids are not exactly 0..size-1.
  void validate() const;

  // Columns `mac,name,device_id` with header.
  static DeviceTable read_csv(std::istream& in);
  static DeviceTable read_csv(const std::filesystem::path& path);

  // 28 devices of a smart-home IoT testbed, ids in listing order.
  static DeviceTable iot_testbed();

 private:
  std::map<std::string, DeviceInfo> by_mac_;
};

std::string normalize_mac(std::string_view mac);

// One JSON object per line, field names as in FlowRecord.
FlowRecord parse_flow_record(const nlohmann::json& j);
std::vector<FlowRecord> read_flow_records(std::istream& in);
std::vector<FlowRecord> read_flow_records(const std::filesystem::path& path);
nlohmann::json to_json(const FlowRecord& flow);

// Adapter for flow summaries in the joy-style layout
// (sa/da/dp/pr/time_start/time_end/bytes_out/bytes_in/num_pkts_out/num_pkts_in,
// optional dns[].qn).
FlowRecord flow_from_joy(const nlohmann::json& j, std::string_view device_mac);

// Sequential fold over one device's flows. Emits a row once a flow ends
// max_period or more after the window's first flow started; all
// accumulators, including the distinct sets, then reset.
class FeatureExtractor {
 public:
  FeatureExtractor(double max_period, int device_id);

  std::optional<FeatureRow> push(const FlowRecord& flow);

 private:
  void reset();

  double max_period_;
  int device_id_;
  bool in_window_ = false;
  bool seen_any_ = false;
  double window_start_ = 0.0;
  double last_start_ = 0.0;
  double last_end_ = 0.0;
  FeatureRow acc_;
  std::uint64_t packets_ = 0;
  std::set<int> ports_;
  std::set<std::string> servers_;
  std::set<std::string> queries_;
};

// Trailing partial window is discarded.
std::vector<FeatureRow> extract_features(std::span<const FlowRecord> flows,
                                         double max_period, int device_id);

struct LabeledStreams {
  std::map<int, std::vector<FlowRecord>> by_device;
  std::size_t dropped = 0;
};

LabeledStreams label_stream(std::span<const FlowRecord> flows, const DeviceTable& table);

void write_feature_header(std::ostream& out);
void write_feature_rows(std::ostream& out, std::span<const FeatureRow> rows);

}  // namespace fedsec
