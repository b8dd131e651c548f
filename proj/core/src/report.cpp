#include "thermoray/report.hpp"

#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

namespace thermoray::report {

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hash_hex(const std::string& bytes) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(bytes)));
  return buf;
}

nlohmann::json metadata(const std::string& config_hash, std::uint64_t seed) {
  return nlohmann::json{{"tool", kToolName},
                        {"version", kToolVersion},
                        {"config_hash", config_hash},
                        {"seed", seed}};
}

nlohmann::json to_json(const phase::ResidualRecord& r) {
  return nlohmann::json{{"name", r.name},         {"lhs", r.lhs},
                        {"rhs", r.rhs},           {"abs_residual", r.abs_residual},
                        {"rel_residual", r.rel_residual}, {"tolerance", r.tolerance},
                        {"pass", r.pass}};
}

void write_json(const std::filesystem::path& p, const nlohmann::json& j) {
  std::ofstream os(p);
  os << j.dump(2) << "\n";
}

void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream os(p);
  os << s;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace thermoray::report
