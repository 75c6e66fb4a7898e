#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nacert/errors.hpp"
#include "nacert/partitioner.hpp"

namespace nacert {

// Exit status of a verification run: 0 fully certified, 2 counterexamples
// found, 3 only unknown volume left.
inline int exit_code(const CoverageReport& rep) {
  if (!rep.counterexamples.empty()) return 2;
  if (rep.certified_fraction >= 1.0) return 0;
  return 3;
}

namespace detail {
inline std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }
inline Vector from_std(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}
}  // namespace detail

inline nlohmann::json report_to_json(const CoverageReport& rep, bool with_regions = false) {
  using nlohmann::json;
  json j;
  j["version"] = 1;
  j["epsilon"] = rep.epsilon;
  j["domain"] = {{"lower", detail::to_std(rep.domain.lower())}, {"upper", detail::to_std(rep.domain.upper())}};
  j["output_count"] = rep.output_count;
  j["certified_fraction"] = rep.certified_fraction;
  j["boxes_checked"] = rep.boxes_checked;
  j["splits"] = rep.splits;
  j["wall_time"] = rep.wall_time;
  j["partial"] = rep.partial;
  json cex = json::array();
  for (const auto& c : rep.counterexamples) cex.push_back({{"x", detail::to_std(c.x)}, {"j", c.j}, {"error", c.error}});
  j["counterexamples"] = std::move(cex);
  json unknown = json::array();
  for (const auto& r : rep.regions)
    if (r.status == RegionStatus::Unknown)
      unknown.push_back(
          {{"j", r.j}, {"lower", detail::to_std(r.box.lower())}, {"upper", detail::to_std(r.box.upper())}});
  j["unknown_boxes"] = std::move(unknown);
  json per = json::array();
  for (const auto& o : rep.per_output)
    per.push_back({{"j", o.j},
                   {"certified_fraction", o.certified_fraction},
                   {"certified_volume", o.certified_volume},
                   {"counterexample_volume", o.counterexample_volume},
                   {"unknown_volume", o.unknown_volume},
                   {"boxes_checked", o.boxes_checked},
                   {"splits", o.splits},
                   {"counterexamples", o.counterexamples}});
  j["per_output"] = std::move(per);
  if (with_regions) {
    json regions = json::array();
    for (const auto& r : rep.regions) {
      json e = {{"status", to_string(r.status)},
                {"j", r.j},
                {"lower", detail::to_std(r.box.lower())},
                {"upper", detail::to_std(r.box.upper())}};
      if (r.status == RegionStatus::Counterexample) {
        e["witness"] = detail::to_std(r.witness);
        e["error"] = r.error;
      }
      regions.push_back(std::move(e));
    }
    j["regions"] = std::move(regions);
  }
  return j;
}

inline CoverageReport report_from_json(const nlohmann::json& j) {
  try {
    CoverageReport rep;
    rep.epsilon = j.at("epsilon").get<double>();
    rep.domain = Hyperrectangle(detail::from_std(j.at("domain").at("lower").get<std::vector<double>>()),
                                detail::from_std(j.at("domain").at("upper").get<std::vector<double>>()));
    rep.output_count = j.at("output_count").get<std::size_t>();
    rep.certified_fraction = j.at("certified_fraction").get<double>();
    rep.boxes_checked = j.value("boxes_checked", std::size_t{0});
    rep.splits = j.value("splits", std::size_t{0});
    rep.wall_time = j.value("wall_time", 0.0);
    rep.partial = j.value("partial", false);
    for (const auto& c : j.at("counterexamples"))
      rep.counterexamples.push_back(
          {detail::from_std(c.at("x").get<std::vector<double>>()), c.at("j").get<std::size_t>(),
           c.at("error").get<double>()});
    for (const auto& o : j.value("per_output", nlohmann::json::array())) {
      OutputCoverage oc;
      oc.j = o.at("j").get<std::size_t>();
      oc.certified_fraction = o.value("certified_fraction", 0.0);
      oc.certified_volume = o.value("certified_volume", 0.0);
      oc.counterexample_volume = o.value("counterexample_volume", 0.0);
      oc.unknown_volume = o.value("unknown_volume", 0.0);
      oc.boxes_checked = o.value("boxes_checked", std::size_t{0});
      oc.splits = o.value("splits", std::size_t{0});
      oc.counterexamples = o.value("counterexamples", std::size_t{0});
      rep.per_output.push_back(oc);
    }
    if (j.contains("regions")) {
      for (const auto& e : j.at("regions")) {
        Region r;
        const auto s = e.at("status").get<std::string>();
        r.status = s == "certified"        ? RegionStatus::Certified
                   : s == "counterexample" ? RegionStatus::Counterexample
                                           : RegionStatus::Unknown;
        r.j = e.at("j").get<std::size_t>();
        r.box = Hyperrectangle(detail::from_std(e.at("lower").get<std::vector<double>>()),
                               detail::from_std(e.at("upper").get<std::vector<double>>()));
        if (e.contains("witness")) r.witness = detail::from_std(e.at("witness").get<std::vector<double>>());
        r.error = e.value("error", 0.0);
        rep.regions.push_back(std::move(r));
      }
    }
    return rep;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed report: ") + e.what());
  }
}

inline void write_json(const nlohmann::json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

inline nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("'" + path + "': " + e.what());
  }
}

}  // namespace nacert
