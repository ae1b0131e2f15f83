#include "subnoise/units.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>

#include <fmt/format.h>

#include "subnoise/error.hpp"

namespace subnoise {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

} // namespace

double parse_engineering(std::string_view text) {
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) text.remove_prefix(1);
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.remove_suffix(1);
  if (text.empty()) throw ValidationError("empty numeric value");

  // std::from_chars for double is available in libstdc++ 11.
  double mantissa = 0.0;
  const char* begin = text.data();
  const char* end = text.data() + text.size();
  if (*begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, mantissa);
  if (ec != std::errc{} || ptr == begin)
    throw ValidationError(fmt::format("malformed numeric value '{}'", text));

  std::string suffix = lower(std::string_view(ptr, static_cast<std::size_t>(end - ptr)));
  double scale = 1.0;
  if (suffix.empty()) scale = 1.0;
  else if (suffix == "t") scale = 1e12;
  else if (suffix == "g") scale = 1e9;
  else if (suffix == "meg") scale = 1e6;
  else if (suffix == "k") scale = 1e3;
  else if (suffix == "m") scale = 1e-3;
  else if (suffix == "u" || suffix == "\xc2\xb5") scale = 1e-6;
  else if (suffix == "n") scale = 1e-9;
  else if (suffix == "p") scale = 1e-12;
  else if (suffix == "f") scale = 1e-15;
  else if (suffix == "a") scale = 1e-18;
  else throw ValidationError(fmt::format("unknown engineering suffix in '{}'", text));

  double value = mantissa * scale;
  if (!std::isfinite(value)) throw ValidationError(fmt::format("non-finite value '{}'", text));
  return value;
}

double json_value(const nlohmann::json& j, std::string_view what) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    try {
      return parse_engineering(j.get<std::string>());
    } catch (const ValidationError& e) {
      throw ValidationError(fmt::format("{}: {}", what, e.what()));
    }
  }
  throw ValidationError(fmt::format("{}: expected number or engineering string", what));
}

double json_field(const nlohmann::json& obj, const char* key) {
  if (!obj.is_object() || !obj.contains(key))
    throw ValidationError(fmt::format("missing field '{}'", key));
  return json_value(obj.at(key), key);
}

double json_field(const nlohmann::json& obj, const char* key, double fallback) {
  if (!obj.is_object() || !obj.contains(key)) return fallback;
  return json_value(obj.at(key), key);
}

double amplitude_to_dbm(double volts, double ohms) {
  const double watts = volts * volts / (2.0 * ohms);
  return 10.0 * std::log10(watts / 1e-3);
}

double dbm_to_amplitude(double dbm, double ohms) {
  const double watts = 1e-3 * std::pow(10.0, dbm / 10.0);
  return std::sqrt(2.0 * ohms * watts);
}

} // namespace subnoise
