#pragma once

// Internal JSON helpers shared by io.cpp and pipeline.cpp. Not installed.

#include <json.hpp>

#include "qpkr/model.hpp"

namespace qpkr::io::detail {

using nlohmann::json;

inline json frequency_to_json(const model::Frequency& f) {
  if (f.kind == model::Frequency::Kind::SqrtTwoPi) return json{{"sqrt", f.radicand}};
  return json{{"value", f.literal}};
}

inline model::Frequency frequency_from_json(const json& j) {
  if (j.contains("sqrt")) return model::Frequency::sqrt_two_pi(j.at("sqrt").get<long>());
  return model::Frequency::from_value(j.at("value").get<double>());
}

inline json parameter_set_to_json(const model::ParameterSet& ps) {
  return json{
      {"label", ps.label},
      {"kbar", ps.kbar},
      {"omega2", frequency_to_json(ps.omega2)},
      {"omega3", frequency_to_json(ps.omega3)},
      {"phi2", ps.phi2},
      {"phi3", ps.phi3},
      {"path",
       {{"k_start", ps.path.k_start},
        {"eps_start", ps.path.eps_start},
        {"k_end", ps.path.k_end},
        {"eps_end", ps.path.eps_end},
        {"coordinate", model::to_string(ps.path.coordinate)}}},
      {"n_kicks", ps.n_kicks},
  };
}

inline model::ParameterSet parameter_set_from_json(const json& j) {
  model::ParameterSet ps;
  ps.label = j.value("label", std::string{});
  ps.kbar = j.at("kbar").get<double>();
  ps.omega2 = frequency_from_json(j.at("omega2"));
  ps.omega3 = frequency_from_json(j.at("omega3"));
  ps.phi2 = j.value("phi2", 0.0);
  ps.phi3 = j.value("phi3", 0.0);
  const json& p = j.at("path");
  ps.path.k_start = p.at("k_start").get<double>();
  ps.path.eps_start = p.at("eps_start").get<double>();
  ps.path.k_end = p.at("k_end").get<double>();
  ps.path.eps_end = p.at("eps_end").get<double>();
  ps.path.coordinate =
      model::coordinate_from_string(p.at("coordinate").get<std::string>());
  ps.n_kicks = j.value("n_kicks", 1000);
  return ps;
}

}  // namespace qpkr::io::detail
