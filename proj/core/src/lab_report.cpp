#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "hjlab/errors.hpp"
#include "hjlab/lab.hpp"

#ifndef HJLAB_VERSION
#define HJLAB_VERSION "0.0.0"
#endif
#ifndef HJLAB_GIT
#define HJLAB_GIT "unknown"
#endif

namespace hjlab {

using json = nlohmann::json;

bool StudyReport::passed() const {
  for (const Criterion& c : criteria) {
    if (!c.passed) return false;
  }
  return true;
}

void StudyReport::check(const std::string& name, double tolerance, double measured, bool ok,
                        const std::string& detail) {
  for (Criterion& c : criteria) {
    if (c.name != name) continue;
    if (c.checks == 0 || measured > c.measured || std::isnan(measured)) c.measured = measured;
    c.tolerance = tolerance;
    ++c.checks;
    if (!ok && c.passed) c.detail = detail;
    c.passed = c.passed && ok;
    return;
  }
  Criterion c;
  c.name = name;
  c.tolerance = tolerance;
  c.measured = measured;
  c.passed = ok;
  c.checks = 1;
  if (!ok) c.detail = detail;
  criteria.push_back(c);
}

std::string version_stamp() { return std::string("hjlab ") + HJLAB_VERSION + " (" + HJLAB_GIT + ")"; }

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::string cell_text(const Cell& c) {
  if (const double* d = std::get_if<double>(&c)) return format_double(*d);
  if (const long long* i = std::get_if<long long>(&c)) return std::to_string(*i);
  if (const bool* b = std::get_if<bool>(&c)) return *b ? "true" : "false";
  const std::string& s = std::get<std::string>(c);
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) {
    if (ch == '"') q += '"';
    q += ch;
  }
  return q + "\"";
}

json cell_json(const Cell& c) {
  if (const double* d = std::get_if<double>(&c)) {
    if (!std::isfinite(*d)) return format_double(*d);
    return *d;
  }
  if (const long long* i = std::get_if<long long>(&c)) return *i;
  if (const bool* b = std::get_if<bool>(&c)) return *b;
  return std::get<std::string>(c);
}

json number_or_text(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

}  // namespace

std::string report_csv(const StudyReport& r) {
  std::ostringstream os;
  for (std::size_t i = 0; i < r.columns.size(); ++i) os << (i ? "," : "") << r.columns[i];
  os << '\n';
  for (const auto& row : r.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << cell_text(row[i]);
    os << '\n';
  }
  return os.str();
}

std::string report_json(const StudyReport& r) {
  json j;
  j["study"] = r.study;
  j["version"] = version_stamp();
  j["config"] = r.config_echo.empty() ? json::object() : json::parse(r.config_echo);
  j["passed"] = r.passed();
  json crit = json::array();
  for (const Criterion& c : r.criteria) {
    crit.push_back({{"name", c.name},
                    {"tolerance", number_or_text(c.tolerance)},
                    {"measured", number_or_text(c.measured)},
                    {"passed", c.passed},
                    {"checks", c.checks},
                    {"detail", c.detail}});
  }
  j["criteria"] = crit;
  j["notes"] = r.notes;
  j["columns"] = r.columns;
  json rows = json::array();
  for (const auto& row : r.rows) {
    json o = json::object();
    for (std::size_t i = 0; i < row.size() && i < r.columns.size(); ++i) o[r.columns[i]] = cell_json(row[i]);
    rows.push_back(o);
  }
  j["rows"] = rows;
  return j.dump(2) + "\n";
}

void emit(const StudyReport& r, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  auto write = [](const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw IoError("cannot write " + p.string());
    out << text;
    if (!out) throw IoError("write failed for " + p.string());
  };
  write(dir / (r.study + ".csv"), report_csv(r));
  write(dir / (r.study + ".json"), report_json(r));
}

std::string summary_line(const StudyReport& r) {
  json j;
  j["study"] = r.study;
  j["passed"] = r.passed();
  j["rows"] = r.rows.size();
  j["wall_seconds"] = r.wall_seconds;
  json failed = json::array();
  for (const Criterion& c : r.criteria) {
    if (!c.passed) failed.push_back(c.name);
  }
  j["failed"] = failed;
  j["version"] = version_stamp();
  return j.dump();
}

}  // namespace hjlab
