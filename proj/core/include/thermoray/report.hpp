// Report emission: JSON records with embedded tool version and config hash,
// CSV tables with fixed %.17g formatting so outputs are byte-stable.
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "thermoray/identities.hpp"

namespace thermoray::report {

inline constexpr const char* kToolName = "thermoray";
inline constexpr const char* kToolVersion = "0.1.0";

// FNV-1a, stable across builds and platforms.
std::uint64_t fnv1a(const std::string& bytes);
std::string hash_hex(const std::string& bytes);

nlohmann::json metadata(const std::string& config_hash, std::uint64_t seed);
nlohmann::json to_json(const phase::ResidualRecord& r);

void write_json(const std::filesystem::path& p, const nlohmann::json& j);
void write_text(const std::filesystem::path& p, const std::string& s);
std::string fmt(double v);  // %.17g

}  // namespace thermoray::report
