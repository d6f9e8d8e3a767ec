#pragma once

#include <cmath>
#include <cstdio>
#include <optional>
#include <string>

#include <json.hpp>

namespace spk {

// Report floats are rounded to six decimals and serialized as %.6f so
// repeated runs emit byte-identical JSON.
inline double round6(double value) {
  double rounded = std::round(value * 1e6) / 1e6;
  return rounded == 0.0 ? 0.0 : rounded;  // avoid -0
}

inline nlohmann::json json_number(double value) {
  return nlohmann::json(round6(value));
}

inline nlohmann::json json_number(std::optional<double> value) {
  if (!value) return nullptr;
  return json_number(*value);
}

namespace detail {

inline void dump_fixed_into(const nlohmann::json& value, std::string& out,
                            int depth) {
  const std::string pad(std::size_t(depth) * 2, ' ');
  const std::string pad_in(std::size_t(depth + 1) * 2, ' ');
  switch (value.type()) {
    case nlohmann::json::value_t::object: {
      if (value.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      std::size_t i = 0;
      for (const auto& [key, member] : value.items()) {
        out += pad_in + nlohmann::json(key).dump() + ": ";
        dump_fixed_into(member, out, depth + 1);
        if (++i < value.size()) out += ',';
        out += '\n';
      }
      out += pad + "}";
      return;
    }
    case nlohmann::json::value_t::array: {
      if (value.empty()) {
        out += "[]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < value.size(); ++i) {
        out += pad_in;
        dump_fixed_into(value[i], out, depth + 1);
        if (i + 1 < value.size()) out += ',';
        out += '\n';
      }
      out += pad + "]";
      return;
    }
    case nlohmann::json::value_t::number_float: {
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.6f", value.get<double>());
      out += buf;
      return;
    }
    default:
      out += value.dump();
      return;
  }
}

}  // namespace detail

// dump(2)-style serialization with every float at exactly six decimals.
inline std::string dump_json_fixed(const nlohmann::json& value) {
  std::string out;
  detail::dump_fixed_into(value, out, 0);
  return out;
}

}  // namespace spk
