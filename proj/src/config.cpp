#include "vtw/config.hpp"

#include <charconv>
#include <cstdlib>
#include <map>
#include <sstream>

#include "vtw/errors.hpp"

namespace vtw {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

double parse_double(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const double parsed = std::strtod(value.c_str(), &end);
  if (end == value.c_str() || *end != '\0') {
    throw InvalidSpec("key '" + key + "': cannot parse '" + value + "' as a number");
  }
  return parsed;
}

std::int64_t parse_i64(const std::string& key, const std::string& value) {
  std::int64_t parsed = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), parsed);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw InvalidSpec("key '" + key + "': cannot parse '" + value + "' as an integer");
  }
  return parsed;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  std::uint64_t parsed = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), parsed);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw InvalidSpec("key '" + key + "': cannot parse '" + value + "' as an unsigned integer");
  }
  return parsed;
}

PadId parse_pad(const std::string& key, const std::string& value) {
  if (value == "left") return PadId::Left;
  if (value == "right") return PadId::Right;
  throw InvalidSpec("key '" + key + "': pad must be 'left' or 'right'");
}

ContactProfile parse_profile(const std::string& key, const std::string& value) {
  if (value == "gaussian") return ContactProfile::Gaussian;
  if (value == "plateau") return ContactProfile::Plateau;
  throw InvalidSpec("key '" + key + "': profile must be 'gaussian' or 'plateau'");
}

}  // namespace

std::vector<std::pair<std::string, std::string>> parse_kv(std::string_view text) {
  std::vector<std::pair<std::string, std::string>> pairs;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const std::size_t newline = text.find('\n');
    std::string_view line = text.substr(0, newline);
    text = newline == std::string_view::npos ? std::string_view{} : text.substr(newline + 1);

    const std::size_t hash = line.find('#');
    if (hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw InvalidSpec("config line " + std::to_string(line_no) + ": missing '='");
    }
    pairs.emplace_back(std::string(trim(line.substr(0, eq))),
                       std::string(trim(line.substr(eq + 1))));
  }
  return pairs;
}

SessionSpec parse_session_spec(std::string_view text) {
  SessionSpec spec;
  std::map<std::size_t, ContactEvent> contacts;

  for (const auto& [key, value] : parse_kv(text)) {
    if (key == "duration_s") {
      spec.duration_s = parse_double(key, value);
    } else if (key == "tactile_rate_hz") {
      spec.tactile_rate_hz = parse_double(key, value);
    } else if (key == "video_rate_hz") {
      spec.video_rate_hz = parse_double(key, value);
    } else if (key == "fiducial_rate_hz") {
      spec.fiducial_rate_hz = parse_double(key, value);
    } else if (key == "rng_seed") {
      spec.rng_seed = parse_u64(key, value);
    } else if (key == "image_payload_bytes") {
      spec.image_payload_bytes = static_cast<std::uint32_t>(parse_u64(key, value));
    } else if (key == "device_clock.offset_us") {
      spec.device_clock.offset_us = parse_i64(key, value);
    } else if (key == "device_clock.drift_ppm") {
      spec.device_clock.drift_ppm = parse_double(key, value);
    } else if (key == "device_clock.jitter_std_us") {
      spec.device_clock.jitter_std_us = parse_double(key, value);
    } else if (key == "video_clock.offset_us") {
      spec.video_clock.offset_us = parse_i64(key, value);
    } else if (key == "video_clock.drift_ppm") {
      spec.video_clock.drift_ppm = parse_double(key, value);
    } else if (key == "video_clock.jitter_std_us") {
      spec.video_clock.jitter_std_us = parse_double(key, value);
    } else if (key.rfind("contact.", 0) == 0) {
      const std::size_t dot = key.find('.', 8);
      if (dot == std::string::npos) throw InvalidSpec("malformed contact key '" + key + "'");
      const std::size_t index = parse_u64(key, key.substr(8, dot - 8));
      const std::string field = key.substr(dot + 1);
      ContactEvent& event = contacts[index];
      if (field == "pad") {
        event.pad_id = parse_pad(key, value);
      } else if (field == "t_start_s") {
        event.t_start_s = parse_double(key, value);
      } else if (field == "t_end_s") {
        event.t_end_s = parse_double(key, value);
      } else if (field == "row") {
        event.center_row = parse_double(key, value);
      } else if (field == "col") {
        event.center_col = parse_double(key, value);
      } else if (field == "radius_taxels") {
        event.radius_taxels = parse_double(key, value);
      } else if (field == "peak") {
        event.peak_value = static_cast<int>(parse_i64(key, value));
      } else if (field == "profile") {
        event.profile = parse_profile(key, value);
      } else {
        throw InvalidSpec("unknown contact field '" + field + "'");
      }
    } else {
      throw InvalidSpec("unknown config key '" + key + "'");
    }
  }

  for (auto& [index, event] : contacts) spec.contact_script.push_back(event);
  spec.validate();
  return spec;
}

std::string session_spec_to_config(const SessionSpec& spec) {
  std::ostringstream out;
  out.precision(17);
  out << "duration_s = " << spec.duration_s << '\n'
      << "tactile_rate_hz = " << spec.tactile_rate_hz << '\n'
      << "video_rate_hz = " << spec.video_rate_hz << '\n'
      << "fiducial_rate_hz = " << spec.fiducial_rate_hz << '\n'
      << "rng_seed = " << spec.rng_seed << '\n'
      << "image_payload_bytes = " << spec.image_payload_bytes << '\n'
      << "device_clock.offset_us = " << spec.device_clock.offset_us << '\n'
      << "device_clock.drift_ppm = " << spec.device_clock.drift_ppm << '\n'
      << "device_clock.jitter_std_us = " << spec.device_clock.jitter_std_us << '\n'
      << "video_clock.offset_us = " << spec.video_clock.offset_us << '\n'
      << "video_clock.drift_ppm = " << spec.video_clock.drift_ppm << '\n'
      << "video_clock.jitter_std_us = " << spec.video_clock.jitter_std_us << '\n';
  for (std::size_t i = 0; i < spec.contact_script.size(); ++i) {
    const ContactEvent& event = spec.contact_script[i];
    const std::string prefix = "contact." + std::to_string(i) + ".";
    out << prefix << "pad = " << pad_name(event.pad_id) << '\n'
        << prefix << "t_start_s = " << event.t_start_s << '\n'
        << prefix << "t_end_s = " << event.t_end_s << '\n'
        << prefix << "row = " << event.center_row << '\n'
        << prefix << "col = " << event.center_col << '\n'
        << prefix << "radius_taxels = " << event.radius_taxels << '\n'
        << prefix << "peak = " << event.peak_value << '\n'
        << prefix << "profile = "
        << (event.profile == ContactProfile::Gaussian ? "gaussian" : "plateau") << '\n';
  }
  return out.str();
}

}  // namespace vtw
