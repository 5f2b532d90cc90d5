// Copyright 2026 The ncsrate authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "ncsrate/common.hpp"
#include "ncsrate/plant.hpp"
#include "ncsrate/rational.hpp"

namespace ncsrate {

using Json = nlohmann::json;

/// Filters serialize as {"num": [...], "den": [...]}, descending powers of z.
inline Json to_json(const RationalFilter& f) {
  return Json{{"num", f.numerator()}, {"den", f.denominator()}};
}

inline RationalFilter filter_from_json(const Json& j) {
  if (j.is_number()) return RationalFilter::constant(j.get<double>());
  if (!j.is_object() || !j.contains("num") || !j.contains("den")) {
    throw Error("filter_from_json: expected {\"num\": [...], \"den\": [...]}");
  }
  return RationalFilter(j.at("num").get<std::vector<double>>(),
                        j.at("den").get<std::vector<double>>());
}

namespace detail {

inline bool looks_like_filter(const Json& j) {
  return j.is_number() || (j.is_object() && j.contains("num"));
}

inline std::vector<RationalFilter> filter_list_from_json(const Json& j) {
  std::vector<RationalFilter> out;
  if (looks_like_filter(j)) {
    out.push_back(filter_from_json(j));
    return out;
  }
  if (!j.is_array()) throw Error("filter_list_from_json: expected array");
  for (const Json& e : j) out.push_back(filter_from_json(e));
  return out;
}

}  // namespace detail

/// Plants serialize as {"G11": ..., "G12": ..., "G21": ..., "G22": ...}.
/// G11 may be a filter, a list (one row) or a nested list (rows x columns).
inline TwoByTwoPlant plant_from_json(const Json& j) {
  for (const char* key : {"G11", "G12", "G21", "G22"}) {
    if (!j.contains(key)) {
      throw Error(std::string("plant_from_json: missing block ") + key);
    }
  }
  std::vector<std::vector<RationalFilter>> g11;
  const Json& j11 = j.at("G11");
  if (detail::looks_like_filter(j11)) {
    g11.push_back({filter_from_json(j11)});
  } else if (j11.is_array() && !j11.empty() &&
             detail::looks_like_filter(j11.front())) {
    g11.push_back(detail::filter_list_from_json(j11));
  } else if (j11.is_array()) {
    for (const Json& row : j11) g11.push_back(detail::filter_list_from_json(row));
  } else {
    throw Error("plant_from_json: malformed G11 block");
  }
  return TwoByTwoPlant(std::move(g11),
                       detail::filter_list_from_json(j.at("G12")),
                       detail::filter_list_from_json(j.at("G21")),
                       filter_from_json(j.at("G22")));
}

inline Json to_json(const TwoByTwoPlant& p) {
  Json g11 = Json::array();
  for (int i = 0; i < p.performance_dim(); ++i) {
    Json row = Json::array();
    for (int jcol = 0; jcol < p.disturbance_dim(); ++jcol) {
      row.push_back(to_json(p.g11(i, jcol)));
    }
    g11.push_back(row);
  }
  Json g12 = Json::array(), g21 = Json::array();
  for (int i = 0; i < p.performance_dim(); ++i) g12.push_back(to_json(p.g12(i)));
  for (int jcol = 0; jcol < p.disturbance_dim(); ++jcol) {
    g21.push_back(to_json(p.g21(jcol)));
  }
  return Json{{"G11", g11}, {"G12", g12}, {"G21", g21}, {"G22", to_json(p.g22())}};
}

}  // namespace ncsrate
