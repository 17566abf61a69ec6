#include "fedsec/flow_features.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <ostream>

#include "fedsec/errors.hpp"
#include "fedsec/io.hpp"

namespace fedsec {

std::string normalize_mac(std::string_view mac) {
  std::string out(mac);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

void DeviceTable::add(std::string_view mac, std::string name, int device_id) {
  auto key = normalize_mac(mac);
  if (by_mac_.count(key) != 0) throw std::invalid_argument("duplicate MAC " + key);
  by_mac_.emplace(std::move(key), DeviceInfo{std::move(name), device_id});
}

const DeviceInfo* DeviceTable::find(std::string_view mac) const {
  auto it = by_mac_.find(normalize_mac(mac));
  return it == by_mac_.end() ? nullptr : &it->second;
}

void DeviceTable::validate() const {
  std::vector<int> ids;
  for (const auto& [mac, info] : by_mac_) ids.push_back(info.device_id);
  std::sort(ids.begin(), ids.end());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] != static_cast<int>(i)) throw std::invalid_argument("device ids must be 0..n-1");
  }
}

DeviceTable DeviceTable::read_csv(std::istream& in) {
  DeviceTable table;
  std::string line;
  if (!std::getline(in, line)) throw ParseError("device table is empty");
  const auto header = split_csv_line(line);
  if (header != std::vector<std::string>{"mac", "name", "device_id"}) {
    throw ParseError("device table header must be mac,name,device_id");
  }
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 3) throw ParseError("device table row needs 3 fields: " + line);
    table.add(f[0], f[1], static_cast<int>(parse_int(f[2])));
  }
  table.validate();
  return table;
}

DeviceTable DeviceTable::read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  return read_csv(in);
}

DeviceTable DeviceTable::iot_testbed() {
  static constexpr std::pair<const char*, const char*> kDevices[] = {
      {"Amazon Echo", "44:65:0d:56:cc:d3"},
      {"August Doorbell Cam", "e0:76:d0:3f:00:ae"},
      {"Awair air quality monitor", "70:88:6b:10:0f:c6"},
      {"Belkin Camera", "b4:75:0e:ec:e5:a9"},
      {"Belkin Motion Sensor", "ec:1a:59:83:28:11"},
      {"Belkin Switch", "ec:1a:59:79:f4:89"},
      {"Blipcare BP Meter", "74:6a:89:00:2e:25"},
      {"Canary Camera", "7c:70:bc:5d:5e:dc"},
      {"Dropcam", "30:8c:fb:2f:e4:b2"},
      {"Google Chromecast", "6c:ad:f8:5e:e4:61"},
      {"Hello Barbie", "28:c2:dd:ff:a5:2d"},
      {"HP Printer", "70:5a:0f:e4:9b:c0"},
      {"iHome PowerPlug", "74:c6:3b:29:d7:1d"},
      {"LiFX Bulb", "d0:73:d5:01:83:08"},
      {"NEST Smoke Sensor", "18:b4:30:25:be:e4"},
      {"Netatmo Camera", "70:ee:50:18:34:43"},
      {"Netatmo Weather station", "70:ee:50:03:b8:ac"},
      {"Phillip Hue Lightbulb", "00:17:88:2b:9a:25"},
      {"Pixstart photo frame", "e0:76:d0:33:bb:85"},
      {"Ring Door Bell", "88:4a:ea:31:66:9d"},
      {"Samsung Smart Cam", "00:16:6c:ab:6b:88"},
      {"Smart Things", "d0:52:a8:00:67:5e"},
      {"TP-Link Camera", "f4:f2:6d:93:51:f1"},
      {"TP-Link Plug", "50:c7:bf:00:56:39"},
      {"Triby Speaker", "18:b7:9e:02:20:44"},
      {"Withings Baby Monitor", "00:24:e4:10:ee:4c"},
      {"Withings Scale", "00:24:e4:1b:6f:96"},
      {"Withings Sleep Sensor", "00:24:e4:20:28:c6"},
  };
  DeviceTable table;
  int id = 0;
  for (const auto& [name, mac] : kDevices) table.add(mac, name, id++);
  return table;
}

namespace {

template <typename T>
T required(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) {
    throw ParseError(std::string("flow record missing field `") + key + "`");
  }
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("flow record field `") + key + "`: " + e.what());
  }
}

void check_flow(const FlowRecord& f) {
  if (f.end_time < f.start_time) throw ParseError("flow ends before it starts");
  if (f.dst_port < 0 || f.dst_port > 65535) throw ParseError("dst_port out of range");
  if (f.bytes > 0 && f.packets == 0) throw ParseError("flow carries bytes but no packets");
}

}  // namespace

FlowRecord parse_flow_record(const nlohmann::json& j) {
  if (!j.is_object()) throw ParseError("flow record must be a JSON object");
  FlowRecord f;
  f.device_mac = required<std::string>(j, "device_mac");
  f.src_addr = required<std::string>(j, "src_addr");
  f.dst_addr = required<std::string>(j, "dst_addr");
  f.dst_port = required<int>(j, "dst_port");
  f.protocol = required<int>(j, "protocol");
  f.start_time = required<double>(j, "start_time");
  f.end_time = required<double>(j, "end_time");
  const auto bytes = required<long long>(j, "bytes");
  const auto packets = required<long long>(j, "packets");
  if (bytes < 0 || packets < 0) throw ParseError("bytes and packets must be nonnegative");
  f.bytes = static_cast<std::uint64_t>(bytes);
  f.packets = static_cast<std::uint64_t>(packets);
  if (j.contains("dns_query") && !j.at("dns_query").is_null()) {
    f.dns_query = required<std::string>(j, "dns_query");
  }
  check_flow(f);
  return f;
}

std::vector<FlowRecord> read_flow_records(std::istream& in) {
  std::vector<FlowRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parse_flow_record(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    } catch (const ParseError& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::vector<FlowRecord> read_flow_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  return read_flow_records(in);
}

nlohmann::json to_json(const FlowRecord& f) {
  nlohmann::json j{{"device_mac", f.device_mac}, {"src_addr", f.src_addr},
                   {"dst_addr", f.dst_addr},     {"dst_port", f.dst_port},
                   {"protocol", f.protocol},     {"start_time", f.start_time},
                   {"end_time", f.end_time},     {"bytes", f.bytes},
                   {"packets", f.packets}};
  if (f.dns_query) j["dns_query"] = *f.dns_query;
  return j;
}

FlowRecord flow_from_joy(const nlohmann::json& j, std::string_view device_mac) {
  auto count = [&](const char* key) -> std::uint64_t {
    return j.contains(key) ? j.at(key).get<std::uint64_t>() : 0;
  };
  FlowRecord f;
  f.device_mac = normalize_mac(device_mac);
  f.src_addr = required<std::string>(j, "sa");
  f.dst_addr = required<std::string>(j, "da");
  f.dst_port = j.contains("dp") ? j.at("dp").get<int>() : 0;
  f.protocol = required<int>(j, "pr");
  f.start_time = required<double>(j, "time_start");
  f.end_time = required<double>(j, "time_end");
  f.bytes = count("bytes_out") + count("bytes_in");
  f.packets = count("num_pkts_out") + count("num_pkts_in");
  if (j.contains("dns") && j.at("dns").is_array()) {
    for (const auto& entry : j.at("dns")) {
      if (entry.contains("qn")) {
        f.dns_query = entry.at("qn").get<std::string>();
        break;
      }
    }
  }
  check_flow(f);
  return f;
}

FeatureExtractor::FeatureExtractor(double max_period, int device_id)
    : max_period_(max_period), device_id_(device_id) {
  if (!(max_period > 0.0)) throw std::domain_error("max_period must be positive");
  reset();
}

void FeatureExtractor::reset() {
  acc_ = FeatureRow{};
  acc_.device_id = device_id_;
  packets_ = 0;
  ports_.clear();
  servers_.clear();
  queries_.clear();
  in_window_ = false;
}

std::optional<FeatureRow> FeatureExtractor::push(const FlowRecord& flow) {
  if (seen_any_ && flow.start_time < last_start_) {
    throw SequencingError("flow records are not sorted by start_time");
  }
  if (flow.end_time < flow.start_time) throw ParseError("flow ends before it starts");

  const double duration = flow.end_time - flow.start_time;
  acc_.total_active_time += duration;
  acc_.total_flow_volume += flow.bytes;
  packets_ += flow.packets;
  ports_.insert(flow.dst_port);
  acc_.number_of_protocols = static_cast<int>(ports_.size());

  if (flow.dst_port == kDnsPort) {
    acc_.dns_interval += duration;
    if (flow.dns_query) queries_.insert(*flow.dns_query);
    acc_.number_of_unique_dns = static_cast<int>(queries_.size());
  } else if (flow.dst_port == kNtpPort) {
    acc_.ntp_interval += duration;
  } else {
    servers_.insert(flow.dst_addr);
    acc_.number_of_servers = static_cast<int>(servers_.size());
  }

  std::optional<FeatureRow> emitted;
  if (!in_window_) {
    in_window_ = true;
    window_start_ = flow.start_time;
  } else {
    acc_.total_sleep_time += std::max(0.0, flow.start_time - last_end_);
  }
  if (flow.end_time - window_start_ >= max_period_) {
    FeatureRow row = acc_;
    row.flow_rate = row.total_active_time > 0.0
                        ? static_cast<double>(row.total_flow_volume) / row.total_active_time
                        : 0.0;
    row.avg_packet_size =
        packets_ > 0 ? static_cast<double>(row.total_flow_volume) / static_cast<double>(packets_)
                     : 0.0;
    emitted = row;
    reset();
  }
  seen_any_ = true;
  last_start_ = flow.start_time;
  last_end_ = flow.end_time;
  return emitted;
}

std::vector<FeatureRow> extract_features(std::span<const FlowRecord> flows, double max_period,
                                         int device_id) {
  FeatureExtractor extractor(max_period, device_id);
  std::vector<FeatureRow> rows;
  for (const auto& f : flows) {
    if (auto row = extractor.push(f)) rows.push_back(*row);
  }
  return rows;
}

LabeledStreams label_stream(std::span<const FlowRecord> flows, const DeviceTable& table) {
  if (table.empty()) throw std::invalid_argument("device table is empty");
  LabeledStreams out;
  for (const auto& f : flows) {
    if (const auto* info = table.find(f.device_mac)) {
      out.by_device[info->device_id].push_back(f);
    } else {
      ++out.dropped;
    }
  }
  return out;
}

void write_feature_header(std::ostream& out) {
  for (auto name : kFeatureColumns) out << name << ',';
  out << "label\n";
}

void write_feature_rows(std::ostream& out, std::span<const FeatureRow> rows) {
  for (const auto& r : rows) {
    out << format_number(r.total_sleep_time) << ',' << format_number(r.total_active_time) << ','
        << r.total_flow_volume << ',' << format_number(r.flow_rate) << ','
        << format_number(r.avg_packet_size) << ',' << r.number_of_servers << ','
        << r.number_of_protocols << ',' << r.number_of_unique_dns << ','
        << format_number(r.dns_interval) << ',' << format_number(r.ntp_interval) << ','
        << r.device_id << '\n';
  }
}

}  // namespace fedsec
