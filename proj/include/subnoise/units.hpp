#pragma once

#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace subnoise {

// Parses a SPICE-style engineering value: "1k", "120f", "2.8m", "15meg",
// "1e-3". Suffixes are case-insensitive; "m" is milli and "meg" is mega.
// Throws ValidationError on anything else.
double parse_engineering(std::string_view text);

// Accepts a JSON number or an engineering-notation string.
double json_value(const nlohmann::json& j, std::string_view what);

// Looks up `key` in `obj` and converts it with json_value.
double json_field(const nlohmann::json& obj, const char* key);
double json_field(const nlohmann::json& obj, const char* key, double fallback);

constexpr double kPi = 3.14159265358979323846;

// dBm of a sinusoid with peak amplitude `volts` across `ohms`.
double amplitude_to_dbm(double volts, double ohms = 50.0);
double dbm_to_amplitude(double dbm, double ohms = 50.0);

} // namespace subnoise
