#pragma once

#include <map>
#include <optional>
#include <string>

#include "rcnet/rcnet.hpp"

namespace rcnet {

// Optional metadata stored alongside a net (construction parameters,
// certified bounds, mode tags). Kept as flat string->number / string->string
// maps so the JSON schema stays stable.
struct NetMeta {
  std::map<std::string, double> numbers;
  std::map<std::string, std::string> strings;
  bool empty() const { return numbers.empty() && strings.empty(); }
};

// JSON text for a net. Deterministic output: fixed key order, one layer per
// line, numbers printed with %.17g (round-trip exact for doubles), so
// serialize(deserialize(serialize(net))) == serialize(net) byte for byte.
std::string serialize(const RCNet& net, const NetMeta* meta = nullptr);

// Parses JSON text produced by serialize (or hand-written files following the
// same schema). Throws ValidationError on malformed input.
RCNet deserialize(const std::string& json_text, NetMeta* meta_out = nullptr);

void save_rcnet(const RCNet& net, const std::string& path, const NetMeta* meta = nullptr);
RCNet load_rcnet(const std::string& path, NetMeta* meta_out = nullptr);

}  // namespace rcnet
